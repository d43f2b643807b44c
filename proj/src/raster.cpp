#include "fracseg/raster.hpp"

#include <algorithm>
#include <cmath>

#include "fracseg/error.hpp"

namespace fracseg::raster {

namespace {

via::Polygon clamp_polygon(const via::Polygon& poly, int h, int w) {
    via::Polygon out;
    out.xs.reserve(poly.xs.size());
    out.ys.reserve(poly.ys.size());
    for (std::size_t i = 0; i < poly.xs.size(); ++i) {
        out.xs.push_back(std::clamp(poly.xs[i], 0.0, double(w)));
        out.ys.push_back(std::clamp(poly.ys[i], 0.0, double(h)));
    }
    return out;
}

double shoelace_area(const via::Polygon& poly) {
    double twice_area = 0.0;
    const std::size_t n = poly.xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        twice_area += poly.xs[i] * poly.ys[j] - poly.xs[j] * poly.ys[i];
    }
    return std::abs(twice_area) / 2.0;
}

} // namespace

void fill_polygon(ClassMask& mask, const via::Polygon& polygon, std::uint8_t class_id) {
    const std::size_t n = polygon.xs.size();
    std::vector<double> crossings;
    for (int i = 0; i < mask.h; ++i) {
        const double cy = i + 0.5;
        crossings.clear();
        for (std::size_t e = 0; e < n; ++e) {
            const std::size_t f = (e + 1) % n;
            const double y1 = polygon.ys[e], y2 = polygon.ys[f];
            if (y1 == y2) continue;
            // half-open span so a scanline through a vertex counts once
            if ((y1 <= cy && cy < y2) || (y2 <= cy && cy < y1)) {
                const double t = (cy - y1) / (y2 - y1);
                crossings.push_back(polygon.xs[e] + t * (polygon.xs[f] - polygon.xs[e]));
            }
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
            // fill pixels whose center x lies in [crossings[k], crossings[k+1])
            const int j_begin = std::max(0, int(std::ceil(crossings[k] - 0.5)));
            const int j_end = std::min(mask.w, int(std::ceil(crossings[k + 1] - 0.5)));
            for (int j = j_begin; j < j_end; ++j) mask.at(i, j) = class_id;
        }
    }
}

ClassMask rasterize(const via::ImageAnnotations& entry, int h, int w,
                    std::vector<std::string>* warnings) {
    if (h <= 0 || w <= 0) throw ShapeError("rasterize: image dims must be positive");
    ClassMask mask(h, w);
    for (std::size_t r = 0; r < entry.regions.size(); ++r) {
        const via::Region& region = entry.regions[r];
        if (region.polygon.vertex_count() < 3) {
            if (warnings) {
                warnings->push_back(entry.filename + " region " + std::to_string(r) +
                                    ": skipped polygon with fewer than 3 vertices");
            }
            continue;
        }
        const via::Polygon clamped = clamp_polygon(region.polygon, h, w);
        if (shoelace_area(clamped) == 0.0) {
            if (warnings) {
                warnings->push_back(entry.filename + " region " + std::to_string(r) +
                                    ": skipped polygon with zero area after clamping");
            }
            continue;
        }
        fill_polygon(mask, clamped, region.class_id);
    }
    return mask;
}

} // namespace fracseg::raster
