#pragma once

#include "gsn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsn {

enum class ImageSource { real, cover, stego };

inline const char* to_string(ImageSource s) {
    switch (s) {
        case ImageSource::real: return "real";
        case ImageSource::cover: return "cover";
        case ImageSource::stego: return "stego";
    }
    return "?";
}

/// A batch of RGB images in [-1, 1], N x 3 x H x W, tagged by origin.
struct ImageBatch {
    Tensor<float> pixels;
    ImageSource tag = ImageSource::real;

    Index count() const { return pixels.rank() == 4 ? pixels.n() : 0; }
};

/// PNG byte quantization: q = round((clamp(x,-1,1)+1)/2 * 255), half rounds up.
inline std::uint8_t quantize_byte(float x) {
    float c = x < -1.0f ? -1.0f : (x > 1.0f ? 1.0f : x);
    float v = (c + 1.0f) * 0.5f * 255.0f;
    return (std::uint8_t)std::floor(v + 0.5f);
}

inline float dequantize_byte(std::uint8_t q) { return (float)q / 255.0f * 2.0f - 1.0f; }

/// Quantize a batch onto the PNG byte grid and map back to [-1, 1]. Applying
/// this before extraction makes in-memory evaluation match the disk path.
Tensor<float> quantize_to_png_grid(const Tensor<float>& pixels);

/// Raw 8-bit RGB rows, used as the interchange with libpng.
struct RgbBytes {
    Index height = 0, width = 0;
    std::vector<std::uint8_t> data;  // height*width*3, row-major RGB

    std::uint8_t& at(Index y, Index x, Index c) { return data[(std::size_t)((y * width + x) * 3 + c)]; }
    std::uint8_t at(Index y, Index x, Index c) const { return data[(std::size_t)((y * width + x) * 3 + c)]; }
};

RgbBytes read_png_bytes(const std::string& path);
void write_png_bytes(const RgbBytes& img, const std::string& path);

/// Save image `index` of the batch as an 8-bit RGB PNG.
void save_png(const ImageBatch& batch, Index index, const std::string& path);
inline void save_png(const ImageBatch& batch, const std::string& path) { save_png(batch, 0, path); }

/// Load a PNG as a single-image batch in [-1, 1].
ImageBatch load_png(const std::string& path, ImageSource tag = ImageSource::real);

/// Center-crop to square and bilinearly resize to `size` x `size`.
RgbBytes crop_resize(const RgbBytes& src, Index size);

}  // namespace gsn
