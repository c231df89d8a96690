#include "gsn/bits.hpp"

#include <doctest.h>

#include <filesystem>

using namespace gsn;

TEST_SUITE_BEGIN("codec");

namespace {
RunConfig tiny_cfg(Index b, Index res) {
    RunConfig cfg;
    cfg.payload_depth = b;
    cfg.resolution = res;
    return cfg;
}
}  // namespace

TEST_CASE("pack fills row-major channel-first with zero padding") {
    BitStream bs{{1, 0, 1}};
    auto d = pack_secret<float>(bs, tiny_cfg(1, 16));
    CHECK(d.dims == Shape{1, 16, 16});
    CHECK(d.v[0] == 1.0f);
    CHECK(d.v[1] == 0.0f);
    CHECK(d.v[2] == 1.0f);
    CHECK(d.v.segment(3, 253).sum() == 0.0f);  // zero pad after payload
}

TEST_CASE("empty stream packs to all zeros") {
    auto d = pack_secret<float>(BitStream{}, tiny_cfg(2, 16));
    CHECK(d.v.sum() == 0.0f);
    CHECK(d.dims == Shape{2, 16, 16});
}

TEST_CASE("one bpp at 128x128 holds exactly 16384 bits") {
    RunConfig cfg = tiny_cfg(1, 128);
    CHECK(cfg.capacity_bits() == 16384);
    BitStream bs;
    bs.bits.assign(16384, 1);
    auto d = pack_secret<float>(bs, cfg);
    CHECK(d.v.sum() == 16384.0f);
    bs.bits.push_back(1);
    CHECK_THROWS_WITH(pack_secret<float>(bs, cfg), doctest::Contains("16384"));
}

TEST_CASE("unpack inverts pack for random payloads") {
    RunConfig cfg = tiny_cfg(3, 16);
    RandomStream rs(77, streams::kSecret);
    for (int trial = 0; trial < 1000; ++trial) {
        Index len = (Index)rs.below((std::uint64_t)cfg.capacity_bits() + 1);
        BitStream bs;
        bs.bits.resize((std::size_t)len);
        for (auto& b : bs.bits) b = rs.bernoulli() ? 1 : 0;
        auto d = pack_secret<float>(bs, cfg);
        CHECK(unpack_secret(d, len) == bs);
    }
}

TEST_CASE("unpack edge cases") {
    RunConfig cfg = tiny_cfg(1, 16);
    auto d = sample_secret<float>(5, cfg);
    CHECK(unpack_secret(d, 0).length() == 0);
    CHECK_THROWS(unpack_secret(d, d.numel() + 1));
    Tensor<float> not_binary({1, 16, 16}, 0.5f);
    CHECK_THROWS(unpack_secret(not_binary, 4));
}

TEST_CASE("samplers are deterministic and correctly shaped") {
    RunConfig cfg;
    auto d1 = sample_secret<float>(9, cfg);
    auto d2 = sample_secret<float>(9, cfg);
    CHECK((d1.v == d2.v).all());
    CHECK(d1.dims == Shape{1, 32, 32});
    for (Index i = 0; i < d1.numel(); ++i) CHECK((d1.v[i] == 0.0f || d1.v[i] == 1.0f));
    CHECK((sample_secret<float>(10, cfg).v != d1.v).any());

    auto z = sample_latent<float>(9, cfg);
    CHECK(z.dims == Shape{128});
    CHECK((sample_latent<float>(9, cfg).v == z.v).all());

    auto n = sample_noise<float>(9, cfg, 0.1);
    CHECK(n.dims == Shape{1, 32, 32});
    auto n_big = sample_noise<float>(9, cfg, 1.0);
    CHECK(n_big.v.abs().mean() > n.v.abs().mean());
    CHECK_THROWS(sample_noise<float>(9, cfg, 0.0));
}

TEST_CASE("byte bridge is MSB-first and invertible") {
    BitStream bits = bits_from_bytes({0xA5});
    CHECK(bits.bits == std::vector<std::uint8_t>{1, 0, 1, 0, 0, 1, 0, 1});
    CHECK(bytes_from_bits(bits) == std::vector<std::uint8_t>{0xA5});

    BitStream short_bits{{1, 1, 0}};
    CHECK(bytes_from_bits(short_bits) == std::vector<std::uint8_t>{0xC0});

    RandomStream rs(3, streams::kSecret);
    std::vector<std::uint8_t> bytes(257);
    for (auto& b : bytes) b = (std::uint8_t)rs.below(256);
    CHECK(bytes_from_bits(bits_from_bytes(bytes)) == bytes);
}

TEST_CASE("payload files round-trip") {
    namespace fs = std::filesystem;
    fs::path tmp = fs::path("test_tmp_codec");
    fs::create_directories(tmp);
    BitStream bs = bits_from_bytes({1, 2, 3, 250});
    save_bits(bs, (tmp / "p.bin").string());
    CHECK(load_bits((tmp / "p.bin").string()) == bs);
    CHECK_THROWS(load_bits((tmp / "missing.bin").string()));
    fs::remove_all(tmp);
}

TEST_SUITE_END();
