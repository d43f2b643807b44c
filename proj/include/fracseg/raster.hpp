#pragma once

#include <string>
#include <vector>

#include "fracseg/mask.hpp"
#include "fracseg/via.hpp"

namespace fracseg::raster {

// Scanline even-odd fill with the pixel-center rule: pixel (i,j) is covered
// iff its center (j+0.5, i+0.5) lies inside the polygon. Regions paint in
// file order, so later regions overwrite earlier ones. Vertices are clamped
// to the image rectangle first; polygons that are degenerate after clamping
// are skipped with a warning. Pixels no region covers stay at the
// unlabeled-void id.
ClassMask rasterize(const via::ImageAnnotations& entry, int h, int w,
                    std::vector<std::string>* warnings = nullptr);

// Fills a single polygon into an existing mask with the given class id.
void fill_polygon(ClassMask& mask, const via::Polygon& polygon, std::uint8_t class_id);

} // namespace fracseg::raster
