#include "doctest.h"

#include <cmath>
#include <vector>

#include "gsn/metrics.hpp"
#include "gsn/rng.hpp"

using namespace gsn;

namespace {

// Independent brute-force minimum error: try every score as a threshold plus
// the two sentinels, counting with plain loops.
double pe_brute(const std::vector<double>& covers, const std::vector<double>& stegos) {
    std::vector<double> cand = covers;
    cand.insert(cand.end(), stegos.begin(), stegos.end());
    cand.push_back(std::numeric_limits<double>::infinity());
    cand.push_back(-std::numeric_limits<double>::infinity());
    double best = 1.0;
    for (double t : cand) {
        double fa = 0, md = 0;
        for (double c : covers) fa += (c >= t) ? 1 : 0;
        for (double s : stegos) md += (s < t) ? 1 : 0;
        best = std::min(best, 0.5 * (fa / (double)covers.size() + md / (double)stegos.size()));
    }
    return best;
}

// AUC as the fraction of (cover, stego) pairs ranked correctly, ties at half.
double auc_pairs(const std::vector<double>& covers, const std::vector<double>& stegos) {
    double sum = 0;
    for (double c : covers)
        for (double s : stegos) sum += (s > c) ? 1.0 : (s == c ? 0.5 : 0.0);
    return sum / ((double)covers.size() * (double)stegos.size());
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("separable, indistinguishable, and interleaved reference cases") {
        DetectionReport sep = roc_auc({0.1, 0.2}, {0.8, 0.9});
        CHECK(sep.pe == 0.0);
        CHECK(sep.auc == doctest::Approx(1.0).epsilon(1e-12));

        DetectionReport same = roc_auc({0.3, 0.7}, {0.3, 0.7});
        CHECK(same.pe == 0.5);
        CHECK(same.auc == doctest::Approx(0.5).epsilon(1e-12));

        DetectionReport mix = roc_auc({0.1, 0.4}, {0.3, 0.9});
        CHECK(mix.pe == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(mix.auc == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(mix.n_cover == 2);
        CHECK(mix.n_stego == 2);
    }

    TEST_CASE("sweep equals exhaustive brute force on random score sets") {
        RandomStream rs(77, 1);
        for (int trial = 0; trial < 1000; ++trial) {
            std::size_t nc = 1 + (std::size_t)rs.below(64);
            std::size_t ns = 1 + (std::size_t)rs.below(64);
            std::vector<double> covers(nc), stegos(ns);
            // Coarse grid forces plenty of ties across and within classes.
            for (auto& v : covers) v = (double)rs.below(8) / 8.0;
            for (auto& v : stegos) v = (double)rs.below(8) / 8.0 + 0.25 * rs.uniform();
            DetectionReport r = pe(covers, stegos);
            CHECK(r.pe == pe_brute(covers, stegos));
            CHECK(r.pe <= 0.5);
            CHECK(r.pe >= 0.0);
        }
    }

    TEST_CASE("pe and auc are invariant under strictly increasing transforms") {
        RandomStream rs(78, 1);
        std::vector<double> covers(40), stegos(40);
        for (auto& v : covers) v = rs.uniform();
        for (auto& v : stegos) v = 0.3 + 0.7 * rs.uniform();
        DetectionReport base = roc_auc(covers, stegos);

        auto warp = [](std::vector<double> v) {
            for (auto& x : v) x = std::exp(3.0 * x) - 2.0;
            return v;
        };
        DetectionReport warped = roc_auc(warp(covers), warp(stegos));
        CHECK(base.pe == warped.pe);
        CHECK(base.auc == doctest::Approx(warped.auc).epsilon(1e-12));
    }

    TEST_CASE("trapezoid auc equals the pair-ordering oracle on distinct scores") {
        RandomStream rs(79, 1);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> covers(1 + (std::size_t)rs.below(30));
            std::vector<double> stegos(1 + (std::size_t)rs.below(30));
            for (auto& v : covers) v = rs.uniform();
            for (auto& v : stegos) v = rs.uniform();
            DetectionReport r = roc_auc(covers, stegos);
            CHECK(r.auc == doctest::Approx(auc_pairs(covers, stegos)).epsilon(1e-9));
        }
    }

    TEST_CASE("roc runs monotonically from (0,0) to (1,1)") {
        RandomStream rs(80, 1);
        std::vector<double> covers(25), stegos(25);
        for (auto& v : covers) v = rs.uniform();
        for (auto& v : stegos) v = rs.uniform();
        DetectionReport r = roc_auc(covers, stegos);
        REQUIRE(r.roc.size() >= 2);
        CHECK(r.roc.front().fa == 0.0);
        CHECK(r.roc.front().tp == 0.0);
        CHECK(r.roc.back().fa == 1.0);
        CHECK(r.roc.back().tp == 1.0);
        for (std::size_t i = 1; i < r.roc.size(); ++i) {
            CHECK(r.roc[i].fa >= r.roc[i - 1].fa);
            CHECK(r.roc[i].tp >= r.roc[i - 1].tp);
        }
    }

    TEST_CASE("empty score lists are rejected") {
        CHECK_THROWS(pe({}, {0.5}));
        CHECK_THROWS(pe({0.5}, {}));
        CHECK_THROWS(roc_auc({}, {}));
    }

    TEST_CASE("pair mae is zero for identical batches and unit for one quantization step") {
        ImageBatch a, b;
        a.pixels = Tensor<float>::full({2, 3, 4, 4}, 0.25f);
        b.pixels = a.pixels;
        CHECK(mae_pairs(a, b) == 0.0);

        b.pixels.v += 2.0f / 255.0f;  // one 8-bit step in [-1,1] coordinates
        CHECK(mae_pairs(a, b) == doctest::Approx(1.0).epsilon(1e-6));

        ImageBatch c;
        c.pixels = Tensor<float>::zeros({1, 3, 4, 4});
        CHECK_THROWS(mae_pairs(a, c));
    }
}
