#include "fracseg/tiling.hpp"

#include "fracseg/error.hpp"

namespace fracseg::tiling {

std::vector<Tile> tile(const image::GrayImage& img, const ClassMask& mask, int tile_size,
                       int stride, std::vector<std::string>* warnings) {
    if (tile_size <= 0 || tile_size % 32 != 0) {
        throw ConfigError("tile size must be a positive multiple of 32, got " +
                          std::to_string(tile_size));
    }
    if (stride <= 0) throw ConfigError("tile stride must be positive");
    if (img.h != mask.h || img.w != mask.w) {
        throw ShapeError("tile: image is " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                         ", mask is " + std::to_string(mask.h) + "x" + std::to_string(mask.w));
    }

    std::vector<Tile> tiles;
    if (tile_size > img.h || tile_size > img.w) {
        if (warnings) {
            warnings->push_back("tile size " + std::to_string(tile_size) +
                                " exceeds image size " + std::to_string(img.h) + "x" +
                                std::to_string(img.w) + "; no tiles produced");
        }
        return tiles;
    }

    for (int oy = 0; oy + tile_size <= img.h; oy += stride) {
        for (int ox = 0; ox + tile_size <= img.w; ox += stride) {
            Tile t;
            t.origin_y = oy;
            t.origin_x = ox;
            t.image = image::GrayImage(tile_size, tile_size);
            t.mask = ClassMask(tile_size, tile_size);
            for (int y = 0; y < tile_size; ++y) {
                for (int x = 0; x < tile_size; ++x) {
                    t.image.at(y, x) = img.at(oy + y, ox + x);
                    t.mask.at(y, x) = mask.at(oy + y, ox + x);
                }
            }
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

void untile(image::GrayImage& canvas_image, ClassMask& canvas_mask,
            const std::vector<Tile>& tiles) {
    if (canvas_image.h != canvas_mask.h || canvas_image.w != canvas_mask.w) {
        throw ShapeError("untile: canvas image and mask dims disagree");
    }
    for (const Tile& t : tiles) {
        if (t.origin_y < 0 || t.origin_x < 0 || t.origin_y + t.image.h > canvas_image.h ||
            t.origin_x + t.image.w > canvas_image.w) {
            throw ShapeError("untile: tile at (" + std::to_string(t.origin_y) + "," +
                             std::to_string(t.origin_x) + ") does not fit the canvas");
        }
        for (int y = 0; y < t.image.h; ++y) {
            for (int x = 0; x < t.image.w; ++x) {
                canvas_image.at(t.origin_y + y, t.origin_x + x) = t.image.at(y, x);
                canvas_mask.at(t.origin_y + y, t.origin_x + x) = t.mask.at(y, x);
            }
        }
    }
}

} // namespace fracseg::tiling
