#pragma once

#include <string>
#include <vector>

#include "fracseg/image.hpp"
#include "fracseg/mask.hpp"

namespace fracseg::tiling {

struct Tile {
    image::GrayImage image;
    ClassMask mask;
    int origin_y = 0;
    int origin_x = 0;
};

// Walks a regular grid from the top-left corner; tiles that would cross the
// right or bottom border are discarded. stride = tile_size gives the
// non-overlapping cover. A tile larger than the image yields an empty list
// with a warning.
std::vector<Tile> tile(const image::GrayImage& img, const ClassMask& mask, int tile_size,
                       int stride, std::vector<std::string>* warnings = nullptr);

// Places tiles back at their origins. Pixels covered by no tile keep the
// canvas fill values.
void untile(image::GrayImage& canvas_image, ClassMask& canvas_mask,
            const std::vector<Tile>& tiles);

} // namespace fracseg::tiling
