#pragma once

#include "gsn/config.hpp"
#include "gsn/image_io.hpp"
#include "gsn/rng.hpp"

#include <string>
#include <vector>

namespace gsn {

/// In-memory real-image corpus. Images are center-cropped, resized to the
/// configured resolution, and mapped to [-1, 1] at load time. Iteration
/// reshuffles every epoch with the seeded stream; the final batch of an
/// epoch may be short.
class Dataset {
public:
    static Dataset load(const std::string& dir, const RunConfig& cfg);

    Index size() const { return (Index)images_.size(); }
    Index skipped() const { return skipped_; }

    ImageBatch next_batch(Index m);
    const Tensor<float>& image(Index i) const { return images_.at((std::size_t)i); }

    void reset(std::uint64_t seed);

    /// Iteration state for exact resume: the stream counter captured when the
    /// current epoch was shuffled, plus the position inside that epoch.
    struct Cursor {
        std::uint64_t shuffle_counter = 0;
        std::uint64_t position = 0;
    };
    Cursor cursor() const { return {shuffle_counter_, (std::uint64_t)cursor_}; }
    void restore(const Cursor& c);

private:
    std::vector<Tensor<float>> images_;  // each 3 x H x W
    std::vector<Index> order_;
    std::size_t cursor_ = 0;
    RandomStream rs_;
    std::uint64_t shuffle_counter_ = 0;
    Index skipped_ = 0;
};

/// Write `count` procedural PNGs (smooth random color fields with soft
/// blobs) into `dir`; the training corpus when no external photos exist.
void make_synthetic_dataset(const std::string& dir, Index count, Index resolution, std::uint64_t seed);

}  // namespace gsn
