#include "gsn/config.hpp"
#include "gsn/rng.hpp"
#include "gsn/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace gsn;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape bookkeeping and element access") {
    Tensor<float> t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.rank() == 4);
    CHECK(t.n() == 2);
    CHECK(t.c() == 3);
    CHECK(t.h() == 4);
    CHECK(t.w() == 5);
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t.v[119] == 7.0f);  // last element in row-major order
    t.at(0, 0, 0, 1) = 3.0f;
    CHECK(t.v[1] == 3.0f);
    CHECK_THROWS(Tensor<float>({2, 0}));
    CHECK_THROWS(t.at(2, 0, 0, 0));
}

TEST_CASE("factories and reshape") {
    auto t = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.at(1, 0) == 3.0);
    auto r = t.reshaped({4});
    CHECK(r.at(3) == 4.0);
    CHECK_THROWS(t.reshaped({5}));
    auto f = Tensor<float>::full({3}, 2.5f);
    CHECK(f.v.sum() == 7.5f);
    CHECK(Tensor<float>::scalar(9.0f).numel() == 1);
    CHECK(t.cast<float>().at(0, 1) == 2.0f);
}

TEST_CASE("matrix views share storage") {
    auto t = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto m = as_matrix(t, 2, 3);
    CHECK(m(1, 2) == 6.0f);
    m(0, 0) = 10.0f;
    CHECK(t.at(0, 0) == 10.0f);
    CHECK_THROWS(as_matrix(t, 4, 2));
}

TEST_CASE("finiteness probe") {
    Tensor<float> t({3});
    CHECK(t.all_finite());
    t.v[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("rng");

TEST_CASE("streams are deterministic and independent") {
    RandomStream a(42, streams::kLatent);
    RandomStream b(42, streams::kLatent);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RandomStream c(42, streams::kSecret);
    RandomStream d(43, streams::kLatent);
    CHECK(RandomStream(42, streams::kLatent).next_u64() != c.next_u64());
    CHECK(RandomStream(42, streams::kLatent).next_u64() != d.next_u64());
}

TEST_CASE("counter save/restore replays the stream") {
    RandomStream rs(7, streams::kEval);
    for (int i = 0; i < 17; ++i) rs.normal();
    std::uint64_t mark = rs.counter();
    double next = rs.normal();
    RandomStream replay(7, streams::kEval);
    replay.set_counter(mark);
    CHECK(replay.normal() == next);
}

TEST_CASE("normal moments") {
    RandomStream rs(123, streams::kInit);
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = rs.normal();
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("scaled normal sampler hits requested sigma") {
    RandomStream rs(5, streams::kMergeNoise);
    auto t = randn<double>(rs, {100000}, 0.1);
    double mean = t.v.mean();
    double sd = std::sqrt((t.v - mean).square().mean());
    CHECK(sd >= 0.097);
    CHECK(sd <= 0.103);
}

TEST_CASE("bernoulli bits are balanced") {
    RandomStream rs(9, streams::kSecret);
    auto t = rand_bits<float>(rs, {100000});
    for (Index i = 0; i < 1000; ++i) CHECK((t.v[i] == 0.0f || t.v[i] == 1.0f));
    double mean = t.v.mean();
    CHECK(mean >= 0.495);
    CHECK(mean <= 0.505);
}

TEST_CASE("uniform stays in [0,1) and uniform_pos in (0,1]") {
    RandomStream rs(11, streams::kDataset);
    for (int i = 0; i < 10000; ++i) {
        double u = rs.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = rs.uniform_pos();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> items(50);
    std::iota(items.begin(), items.end(), 0);
    RandomStream rs(3, streams::kDataset);
    shuffle(rs, items);
    CHECK(std::set<int>(items.begin(), items.end()).size() == 50);

    std::vector<int> again(50);
    std::iota(again.begin(), again.end(), 0);
    RandomStream rs2(3, streams::kDataset);
    shuffle(rs2, again);
    CHECK(items == again);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("config");

TEST_CASE("round trip through text") {
    RunConfig cfg;
    cfg.resolution = 64;
    cfg.payload_depth = 4;
    cfg.lr = 1e-3;
    cfg.use_hgd = false;
    cfg.adv_loss = "literal";
    RunConfig back = RunConfig::from_text(cfg.to_text());
    CHECK(back == cfg);
}

TEST_CASE("parser accepts comments and blanks, rejects bad keys") {
    auto cfg = RunConfig::from_text("# header\nresolution = 64\n\npayload_depth=2  # inline\n");
    CHECK(cfg.resolution == 64);
    CHECK(cfg.payload_depth == 2);
    CHECK_THROWS_WITH(RunConfig::from_text("resolutoin = 64\n"),
                      doctest::Contains("resolutoin"));
    CHECK_THROWS_WITH(RunConfig::from_text("resolution = abc\n"), doctest::Contains("resolution"));
    CHECK_THROWS(RunConfig::from_text("resolution\n"));
}

TEST_CASE("validation enforces structural invariants") {
    RunConfig cfg;
    cfg.validate();
    cfg.resolution = 48;  // not a power of two
    CHECK_THROWS(cfg.validate());
    cfg.resolution = 32;
    cfg.payload_depth = 9;
    CHECK_THROWS(cfg.validate());
    cfg.payload_depth = 1;
    cfg.delta = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg.delta = 10.0;
    cfg.sigma_test = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg.sigma_test = 0.1;
    cfg.adv_loss = "wgan";
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("capacity follows payload depth and resolution") {
    RunConfig cfg;
    CHECK(cfg.capacity_bits() == 1024);  // 1 bpp at 32x32
    cfg.resolution = 128;
    CHECK(cfg.capacity_bits() == 16384);  // 1 bpp at 128x128 fills one image
    cfg.payload_depth = 4;
    CHECK(cfg.capacity_bits() == 65536);
}

TEST_SUITE_END();
