#pragma once

#include "gsn/config.hpp"
#include "gsn/rng.hpp"
#include "gsn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsn {

/// Ordered secret bits. The carrier for everything the sender wants hidden.
struct BitStream {
    std::vector<std::uint8_t> bits;  // each 0 or 1

    Index length() const { return (Index)bits.size(); }
    bool operator==(const BitStream&) const = default;
};

/// Row-major, channel-first fill of a B x H x W secret tensor, zero-padded.
template <typename S = float>
Tensor<S> pack_secret(const BitStream& bs, const RunConfig& cfg) {
    GSN_CHECK(bs.length() <= cfg.capacity_bits(), "payload of " << bs.length() << " bits exceeds capacity "
                                                                << cfg.capacity_bits() << " (B=" << cfg.payload_depth
                                                                << ", " << cfg.resolution << "x" << cfg.resolution
                                                                << ")");
    Tensor<S> d({cfg.payload_depth, cfg.resolution, cfg.resolution});
    for (Index i = 0; i < bs.length(); ++i) {
        GSN_CHECK(bs.bits[(std::size_t)i] <= 1, "bitstream entry " << i << " is not binary");
        d.v[i] = (S)bs.bits[(std::size_t)i];
    }
    return d;
}

template <typename S>
BitStream unpack_secret(const Tensor<S>& d, Index n_bits) {
    GSN_CHECK(n_bits >= 0 && n_bits <= d.numel(),
              "cannot unpack " << n_bits << " bits from a tensor of " << d.numel());
    BitStream bs;
    bs.bits.resize((std::size_t)n_bits);
    for (Index i = 0; i < n_bits; ++i) {
        GSN_CHECK(d.v[i] == (S)0 || d.v[i] == (S)1, "secret tensor entry " << i << " is not binary");
        bs.bits[(std::size_t)i] = d.v[i] == (S)1 ? 1 : 0;
    }
    return bs;
}

template <typename S = float>
Tensor<S> sample_secret(std::uint64_t seed, const RunConfig& cfg) {
    RandomStream rs(seed, streams::kSecret);
    return rand_bits<S>(rs, {cfg.payload_depth, cfg.resolution, cfg.resolution});
}

template <typename S = float>
Tensor<S> sample_latent(std::uint64_t seed, const RunConfig& cfg) {
    RandomStream rs(seed, streams::kLatent);
    return randn<S>(rs, {cfg.latent_dim});
}

template <typename S = float>
Tensor<S> sample_noise(std::uint64_t seed, const RunConfig& cfg, double sigma) {
    GSN_CHECK(sigma > 0, "noise sigma must be positive, got " << sigma);
    RandomStream rs(seed, streams::kMergeNoise);
    return randn<S>(rs, {1, cfg.resolution, cfg.resolution}, sigma);
}

/// FNV-1a 64-bit fingerprint; stable across platforms for manifests.
inline std::uint64_t fnv1a64(const std::vector<std::uint8_t>& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : data) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// MSB-first bit view of raw bytes; inverse pads the last byte with zeros.
BitStream bits_from_bytes(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> bytes_from_bits(const BitStream& bs);

BitStream load_bits(const std::string& path);
void save_bits(const BitStream& bs, const std::string& path);

}  // namespace gsn
