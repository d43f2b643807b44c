#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fracseg/mask.hpp"

namespace fracseg::via {

struct Polygon {
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t vertex_count() const { return xs.size(); }
};

struct Region {
    Polygon polygon;
    std::uint8_t class_id = kBackgroundId;
    std::string label;
};

struct ImageAnnotations {
    std::string filename;
    std::vector<Region> regions;
};

// Parsed annotation document. Regions keep their file order, which defines
// rasterization precedence. Skipped shapes are recorded in warnings.
struct AnnotationProject {
    std::map<std::string, ImageAnnotations> entries;
    std::vector<std::string> warnings;
};

// Accepts the VIA export format: either a top-level filename-keyed object or
// the {"_via_img_metadata": {...}} wrapper; regions as array or object.
// Polygon regions need shape_attributes.all_points_x/all_points_y; the class
// label is the region_attributes value (key "label" or "class" preferred,
// otherwise the single string attribute). Labels outside
// {background, intergranular, transgranular} fail the parse; non-polygon
// shapes and sub-3-vertex polygons are skipped with a warning.
AnnotationProject parse_via_json(const std::string& text);

AnnotationProject parse_via_file(const std::string& path);

} // namespace fracseg::via
