#pragma once

#include "gsn/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace gsn {

namespace detail {

// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based random stream. State is (seed, stream, counter), so a stream
/// serializes to a single integer and substreams never collide or overlap.
/// All draws are reproducible across platforms; no libstdc++ distributions.
class RandomStream {
public:
    RandomStream() = default;
    RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

    std::uint64_t next_u64() {
        std::uint64_t h = detail::mix64(seed_ ^ detail::mix64(stream_ ^ detail::mix64(counter_)));
        ++counter_;
        return h;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return ((double)(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double normal() {
        // Box-Muller, cosine branch only: two draws per normal keeps the
        // counter advance independent of call history.
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli() { return (next_u64() & 1ULL) != 0; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
};

template <typename S>
Tensor<S> randn(RandomStream& rs, Shape shape, double stddev = 1.0, double mean = 0.0) {
    Tensor<S> t(std::move(shape));
    for (Index i = 0; i < t.numel(); ++i) t.v[i] = (S)(mean + stddev * rs.normal());
    return t;
}

template <typename S>
Tensor<S> rand_bits(RandomStream& rs, Shape shape) {
    Tensor<S> t(std::move(shape));
    for (Index i = 0; i < t.numel(); ++i) t.v[i] = rs.bernoulli() ? (S)1 : (S)0;
    return t;
}

// In-place Fisher-Yates with the stream's order.
template <typename T>
void shuffle(RandomStream& rs, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = (std::size_t)rs.below(i);
        std::swap(items[i - 1], items[j]);
    }
}

// Stable stream ids; checkpointed counters index into this table.
namespace streams {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kLatent = 2;
constexpr std::uint64_t kSecret = 3;
constexpr std::uint64_t kMergeNoise = 4;
constexpr std::uint64_t kBlockNoise = 5;
constexpr std::uint64_t kDataset = 6;
constexpr std::uint64_t kPathLength = 7;
constexpr std::uint64_t kExtractNoise = 8;
constexpr std::uint64_t kEval = 9;
constexpr std::uint64_t kRegDir = 10;
constexpr std::uint64_t kEvalDetector = 11;
}  // namespace streams

}  // namespace gsn
