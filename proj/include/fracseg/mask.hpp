#pragma once

#include <cstdint>
#include <vector>

namespace fracseg {

// Pixel class ids shared across the toolkit. 255 marks pixels no polygon
// covered; it is kept distinct from background so evaluation can exclude it.
inline constexpr std::uint8_t kBackgroundId = 0;
inline constexpr std::uint8_t kIntergranularId = 1;
inline constexpr std::uint8_t kTransgranularId = 2;
inline constexpr std::uint8_t kUnlabeledId = 255;
inline constexpr int kNumClasses = 3;

// Per-pixel class-id raster aligned to an image tile.
struct ClassMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> ids;

    ClassMask() = default;
    ClassMask(int height, int width, std::uint8_t fill = kUnlabeledId)
        : h(height), w(width),
          ids(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

    std::uint8_t& at(int y, int x) { return ids[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return ids[static_cast<std::size_t>(y) * w + x]; }

    bool operator==(const ClassMask&) const = default;
};

// Per-pixel evaluability flags (1 = pixel participates in evaluation).
struct BoolMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> v;

    BoolMask() = default;
    BoolMask(int height, int width, std::uint8_t fill = 1)
        : h(height), w(width),
          v(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

    std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

    bool operator==(const BoolMask&) const = default;
};

} // namespace fracseg
