#include "gsn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace gsn {

namespace fs = std::filesystem;

Dataset Dataset::load(const std::string& dir, const RunConfig& cfg) {
    GSN_CHECK(fs::is_directory(dir), "dataset path is not a directory: " << dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());

    Dataset ds;
    ds.rs_ = RandomStream(cfg.seed, streams::kDataset);
    for (const std::string& f : files) {
        try {
            RgbBytes raw = read_png_bytes(f);
            RgbBytes scaled = crop_resize(raw, cfg.resolution);
            Tensor<float> img({3, cfg.resolution, cfg.resolution});
            for (Index y = 0; y < cfg.resolution; ++y)
                for (Index x = 0; x < cfg.resolution; ++x)
                    for (Index c = 0; c < 3; ++c) img.at(c, y, x) = dequantize_byte(scaled.at(y, x, c));
            ds.images_.push_back(std::move(img));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping unreadable image %s (%s)\n", f.c_str(), e.what());
            ++ds.skipped_;
        }
    }
    GSN_CHECK(!ds.images_.empty(), "no readable PNG images in " << dir);
    ds.order_.resize(ds.images_.size());
    for (std::size_t i = 0; i < ds.order_.size(); ++i) ds.order_[i] = (Index)i;
    ds.cursor_ = ds.order_.size();  // force a shuffle before the first batch
    return ds;
}

void Dataset::reset(std::uint64_t seed) {
    rs_ = RandomStream(seed, streams::kDataset);
    cursor_ = order_.size();
    shuffle_counter_ = rs_.counter();
}

void Dataset::restore(const Cursor& c) {
    GSN_CHECK(c.position <= order_.size(), "cursor position " << c.position << " exceeds dataset size "
                                                              << order_.size());
    rs_.set_counter(c.shuffle_counter);
    shuffle_counter_ = c.shuffle_counter;
    if (c.position < order_.size()) {
        // Replay the epoch shuffle so the order matches the original run.
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = (Index)i;
        shuffle(rs_, order_);
    }
    cursor_ = (std::size_t)c.position;
}

ImageBatch Dataset::next_batch(Index m) {
    GSN_CHECK(m >= 1, "batch size must be positive");
    GSN_CHECK(!images_.empty(), "dataset is empty");
    if (cursor_ >= order_.size()) {
        // shuffle from identity so iteration is a pure function of the stream
        shuffle_counter_ = rs_.counter();
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = (Index)i;
        shuffle(rs_, order_);
        cursor_ = 0;
    }
    Index take = std::min<Index>(m, (Index)(order_.size() - cursor_));
    Index h = images_[0].dim(1), w = images_[0].dim(2);
    ImageBatch batch;
    batch.tag = ImageSource::real;
    batch.pixels = Tensor<float>({take, 3, h, w});
    for (Index i = 0; i < take; ++i) {
        const Tensor<float>& img = images_[(std::size_t)order_[cursor_ + (std::size_t)i]];
        std::copy(img.data(), img.data() + img.numel(), batch.pixels.data() + i * img.numel());
    }
    cursor_ += (std::size_t)take;
    return batch;
}

namespace {

// Bilinear upsample of a 3 x g x g control grid to 3 x n x n.
Tensor<float> upsample_grid(const Tensor<float>& grid, Index n) {
    Index g = grid.dim(1);
    Tensor<float> out({3, n, n});
    double scale = (double)g / (double)n;
    for (Index y = 0; y < n; ++y) {
        double sy = (y + 0.5) * scale - 0.5;
        Index iy = (Index)std::floor(sy);
        double fy = sy - iy;
        Index y1 = std::clamp(iy, (Index)0, g - 1), y2 = std::clamp(iy + 1, (Index)0, g - 1);
        for (Index x = 0; x < n; ++x) {
            double sx = (x + 0.5) * scale - 0.5;
            Index ix = (Index)std::floor(sx);
            double fx = sx - ix;
            Index x1 = std::clamp(ix, (Index)0, g - 1), x2 = std::clamp(ix + 1, (Index)0, g - 1);
            for (Index c = 0; c < 3; ++c) {
                double v = (1 - fy) * ((1 - fx) * grid.at(c, y1, x1) + fx * grid.at(c, y1, x2)) +
                           fy * ((1 - fx) * grid.at(c, y2, x1) + fx * grid.at(c, y2, x2));
                out.at(c, y, x) = (float)v;
            }
        }
    }
    return out;
}

}  // namespace

void make_synthetic_dataset(const std::string& dir, Index count, Index resolution, std::uint64_t seed) {
    GSN_CHECK(count >= 1, "dataset size must be positive");
    fs::create_directories(dir);
    RandomStream rs(seed, streams::kDataset);
    for (Index idx = 0; idx < count; ++idx) {
        Tensor<float> grid = randn<float>(rs, {3, 4, 4}, 0.55);
        Tensor<float> img = upsample_grid(grid, resolution);

        // global color cast
        float cast[3] = {(float)rs.normal() * 0.25f, (float)rs.normal() * 0.25f, (float)rs.normal() * 0.25f};
        // one soft blob for non-Gaussian structure
        double cy = rs.uniform() * resolution, cx = rs.uniform() * resolution;
        double radius = (0.15 + 0.25 * rs.uniform()) * resolution;
        float amp[3] = {(float)rs.normal() * 0.6f, (float)rs.normal() * 0.6f, (float)rs.normal() * 0.6f};

        for (Index y = 0; y < resolution; ++y)
            for (Index x = 0; x < resolution; ++x) {
                double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (radius * radius);
                float blob = (float)std::exp(-d2);
                for (Index c = 0; c < 3; ++c) {
                    float v = img.at(c, y, x) + cast[c] + amp[c] * blob;
                    img.at(c, y, x) = std::tanh(v);
                }
            }

        ImageBatch batch;
        batch.tag = ImageSource::real;
        batch.pixels = img.reshaped({1, 3, resolution, resolution});
        char name[32];
        std::snprintf(name, sizeof name, "img_%05lld.png", (long long)idx);
        save_png(batch, (fs::path(dir) / name).string());
    }
}

}  // namespace gsn
