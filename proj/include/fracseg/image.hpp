#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fracseg::image {

struct GrayImage {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> pixels; // row-major, one byte per pixel

    GrayImage() = default;
    GrayImage(int h_, int w_, std::uint8_t fill = 0)
        : h(h_), w(w_), pixels(static_cast<std::size_t>(h_) * w_, fill) {}

    std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * w + x]; }

    bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> pixels; // row-major, 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int h_, int w_) : h(h_), w(w_), pixels(static_cast<std::size_t>(h_) * w_ * 3, 0) {}

    std::uint8_t* at(int y, int x) {
        return pixels.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    }
    const std::uint8_t* at(int y, int x) const {
        return pixels.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    }

    bool operator==(const RgbImage&) const = default;
};

// Reads any 8/16-bit gray, palette, RGB or RGBA PNG down to 8-bit grayscale.
// Color inputs are converted with the Rec.601 luma weights and a note is
// appended to warnings when given.
GrayImage read_gray_png(const std::string& path, std::vector<std::string>* warnings = nullptr);

void write_gray_png(const GrayImage& img, const std::string& path);
void write_rgb_png(const RgbImage& img, const std::string& path);

// Grows an image to (target_h, target_w) by mirroring it across its right and
// bottom edges (edge pixels included in the reflection). Used to make
// arbitrary prediction inputs divisible by the network's downsample factor.
GrayImage reflect_pad(const GrayImage& img, int target_h, int target_w);

} // namespace fracseg::image
