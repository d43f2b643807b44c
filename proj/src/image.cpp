#include "fracseg/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "fracseg/error.hpp"

namespace fracseg::image {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    throw DataError("png: " + std::string(msg) +
                    " (" + static_cast<const char*>(png_get_error_ptr(png)) + ")");
}

void png_warning_handler(png_structp, png_const_charp) {}

} // namespace

GrayImage read_gray_png(const std::string& path, std::vector<std::string>* warnings) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open image: " + path);

    png_structp png = png_create_read_struct(
        PNG_LIBPNG_VER_STRING, const_cast<char*>(path.c_str()), png_error_handler,
        png_warning_handler);
    if (!png) throw DataError("png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png info allocation failed");
    }

    try {
        png_init_io(png, file.get());
        png_read_info(png, info);

        const png_uint_32 w = png_get_image_width(png, info);
        const png_uint_32 h = png_get_image_height(png, info);
        const int color = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);

        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (depth == 16) png_set_strip_16(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);

        const int channels = png_get_channels(png, info);
        const bool is_color = channels >= 3;
        if (is_color && warnings) {
            warnings->push_back(path + ": color image converted to grayscale (Rec.601 luma)");
        }

        std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * w * channels);
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y) {
            rows[y] = raw.data() + static_cast<std::size_t>(y) * w * channels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        GrayImage out(static_cast<int>(h), static_cast<int>(w));
        if (is_color) {
            for (std::size_t i = 0; i < out.pixels.size(); ++i) {
                const std::uint8_t* p = raw.data() + i * channels;
                const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                out.pixels[i] = static_cast<std::uint8_t>(std::lround(luma));
            }
        } else {
            out.pixels = std::move(raw);
        }
        png_destroy_read_struct(&png, &info, nullptr);
        return out;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

namespace {

void write_png(const std::string& path, int h, int w, int color_type, int bytes_per_pixel,
               const std::uint8_t* pixels) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw DataError("cannot write image: " + path);

    png_structp png = png_create_write_struct(
        PNG_LIBPNG_VER_STRING, const_cast<char*>(path.c_str()), png_error_handler,
        png_warning_handler);
    if (!png) throw DataError("png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png info allocation failed");
    }

    try {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                     color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < h; ++y) {
            png_write_row(png, const_cast<png_bytep>(
                                   pixels + static_cast<std::size_t>(y) * w * bytes_per_pixel));
        }
        png_write_end(png, info);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

} // namespace

void write_gray_png(const GrayImage& img, const std::string& path) {
    if (img.h <= 0 || img.w <= 0) throw ShapeError("write_gray_png: empty image");
    write_png(path, img.h, img.w, PNG_COLOR_TYPE_GRAY, 1, img.pixels.data());
}

void write_rgb_png(const RgbImage& img, const std::string& path) {
    if (img.h <= 0 || img.w <= 0) throw ShapeError("write_rgb_png: empty image");
    write_png(path, img.h, img.w, PNG_COLOR_TYPE_RGB, 3, img.pixels.data());
}

namespace {

int mirror_index(int i, int extent) {
    const int period = 2 * extent;
    int p = i % period;
    if (p < 0) p += period;
    return p < extent ? p : period - 1 - p;
}

} // namespace

GrayImage reflect_pad(const GrayImage& img, int target_h, int target_w) {
    if (img.h <= 0 || img.w <= 0) throw ShapeError("reflect_pad: empty image");
    if (target_h < img.h || target_w < img.w) {
        throw ShapeError("reflect_pad: target " + std::to_string(target_h) + "x" +
                         std::to_string(target_w) + " is smaller than the image");
    }
    GrayImage out(target_h, target_w);
    for (int y = 0; y < target_h; ++y) {
        const int sy = mirror_index(y, img.h);
        for (int x = 0; x < target_w; ++x) {
            out.at(y, x) = img.at(sy, mirror_index(x, img.w));
        }
    }
    return out;
}

} // namespace fracseg::image
