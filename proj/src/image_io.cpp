#include "gsn/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace gsn {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor<float> quantize_to_png_grid(const Tensor<float>& pixels) {
    Tensor<float> out(pixels.dims);
    for (Index i = 0; i < pixels.numel(); ++i) out.v[i] = dequantize_byte(quantize_byte(pixels.v[i]));
    return out;
}

RgbBytes read_png_bytes(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    GSN_CHECK(fp != nullptr, "cannot open PNG " << path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    GSN_CHECK(png != nullptr, "libpng read-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng info-struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("malformed PNG " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    // Normalize every input to 8-bit RGB.
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    GSN_CHECK(png_get_rowbytes(png, info) == width * 3, "PNG normalization failed for " << path);

    RgbBytes img;
    img.height = (Index)height;
    img.width = (Index)width;
    img.data.resize((std::size_t)height * width * 3);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.data.data() + (std::size_t)y * width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png_bytes(const RgbBytes& img, const std::string& path) {
    GSN_CHECK(img.height > 0 && img.width > 0, "cannot write empty image");
    GSN_CHECK((Index)img.data.size() == img.height * img.width * 3, "RGB buffer size mismatch");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    GSN_CHECK(fp != nullptr, "cannot write PNG " << path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    GSN_CHECK(png != nullptr, "libpng write-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng info-struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("PNG write failed for " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, (png_uint_32)img.width, (png_uint_32)img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_const_bytep> rows((std::size_t)img.height);
    for (Index y = 0; y < img.height; ++y) rows[(std::size_t)y] = img.data.data() + (std::size_t)y * img.width * 3;
    png_write_rows(png, const_cast<png_bytepp>(rows.data()), (png_uint_32)img.height);
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

void save_png(const ImageBatch& batch, Index index, const std::string& path) {
    const Tensor<float>& p = batch.pixels;
    GSN_CHECK(p.rank() == 4 && p.c() == 3, "save_png expects an Nx3xHxW batch, got " << shape_str(p.dims));
    GSN_CHECK(index >= 0 && index < p.n(), "image index " << index << " out of range " << p.n());
    GSN_CHECK(p.all_finite(), "cannot save non-finite pixels");
    Index h = p.h(), w = p.w();
    RgbBytes img;
    img.height = h;
    img.width = w;
    img.data.resize((std::size_t)(h * w * 3));
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index c = 0; c < 3; ++c) img.at(y, x, c) = quantize_byte(p.at(index, c, y, x));
    write_png_bytes(img, path);
}

ImageBatch load_png(const std::string& path, ImageSource tag) {
    RgbBytes img = read_png_bytes(path);
    ImageBatch batch;
    batch.tag = tag;
    batch.pixels = Tensor<float>({1, 3, img.height, img.width});
    for (Index y = 0; y < img.height; ++y)
        for (Index x = 0; x < img.width; ++x)
            for (Index c = 0; c < 3; ++c) batch.pixels.at(0, c, y, x) = dequantize_byte(img.at(y, x, c));
    return batch;
}

RgbBytes crop_resize(const RgbBytes& src, Index size) {
    GSN_CHECK(size >= 1, "target size must be positive");
    GSN_CHECK(src.height >= 1 && src.width >= 1, "source image is empty");
    Index side = std::min(src.height, src.width);
    Index y0 = (src.height - side) / 2;
    Index x0 = (src.width - side) / 2;

    RgbBytes dst;
    dst.height = size;
    dst.width = size;
    dst.data.resize((std::size_t)(size * size * 3));
    double scale = (double)side / (double)size;
    for (Index y = 0; y < size; ++y) {
        double sy = (y + 0.5) * scale - 0.5;
        Index iy = (Index)std::floor(sy);
        double fy = sy - iy;
        Index y1 = std::clamp(iy, (Index)0, side - 1), y2 = std::clamp(iy + 1, (Index)0, side - 1);
        for (Index x = 0; x < size; ++x) {
            double sx = (x + 0.5) * scale - 0.5;
            Index ix = (Index)std::floor(sx);
            double fx = sx - ix;
            Index x1 = std::clamp(ix, (Index)0, side - 1), x2 = std::clamp(ix + 1, (Index)0, side - 1);
            for (Index c = 0; c < 3; ++c) {
                double v = (1 - fy) * ((1 - fx) * src.at(y0 + y1, x0 + x1, c) + fx * src.at(y0 + y1, x0 + x2, c)) +
                           fy * ((1 - fx) * src.at(y0 + y2, x0 + x1, c) + fx * src.at(y0 + y2, x0 + x2, c));
                dst.at(y, x, c) = (std::uint8_t)std::clamp((Index)std::lround(v), (Index)0, (Index)255);
            }
        }
    }
    return dst;
}

}  // namespace gsn
