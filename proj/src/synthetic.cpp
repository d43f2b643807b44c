#include "fracseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "fracseg/error.hpp"

namespace fracseg::synthetic {

namespace {

struct Site {
    double x, y;
};

// Distance to the nearest and second-nearest site.
void two_nearest(const std::vector<Site>& sites, double x, double y, double& d1, double& d2,
                 std::size_t& nearest) {
    d1 = d2 = 1e30;
    nearest = 0;
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const double dx = sites[s].x - x;
        const double dy = sites[s].y - y;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < d1) {
            d2 = d1;
            d1 = d;
            nearest = s;
        } else if (d < d2) {
            d2 = d;
        }
    }
}

std::uint8_t clamp_pixel(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

} // namespace

SyntheticTile make_tile(Rng& rng, int size) {
    if (size < 8) throw ConfigError("synthetic tile size must be >= 8");

    // Coarse partition into fracture-mode regions.
    const int region_count = 4 + static_cast<int>(rng.uniform_int(4));
    std::vector<Site> regions(region_count);
    std::vector<std::uint8_t> region_class(region_count);
    bool has[2] = {false, false};
    for (int r = 0; r < region_count; ++r) {
        regions[r] = {rng.uniform() * size, rng.uniform() * size};
        const int mode = static_cast<int>(rng.uniform_int(2));
        region_class[r] = mode == 0 ? kIntergranularId : kTransgranularId;
        has[mode] = true;
    }
    // Both modes appear in every tile so held-out evaluation always has both
    // classes present.
    if (!has[0]) region_class[0] = kIntergranularId;
    if (!has[1]) region_class[region_count > 1 ? 1 : 0] = kTransgranularId;

    // Fine grains for the intergranular ridge texture.
    const int grain_count = std::max(12, size * size / 100);
    std::vector<Site> grains(grain_count);
    for (int g = 0; g < grain_count; ++g) {
        grains[g] = {rng.uniform() * size, rng.uniform() * size};
    }
    std::vector<double> grain_shade(grain_count);
    for (int g = 0; g < grain_count; ++g) grain_shade[g] = 70.0 + 50.0 * rng.uniform();

    // Smooth gradient coefficients per transgranular facet.
    std::vector<double> facet_base(region_count), facet_gx(region_count), facet_gy(region_count);
    for (int r = 0; r < region_count; ++r) {
        facet_base[r] = 130.0 + 60.0 * rng.uniform();
        facet_gx[r] = (rng.uniform() - 0.5) * 1.6;
        facet_gy[r] = (rng.uniform() - 0.5) * 1.6;
    }

    SyntheticTile tile{image::GrayImage(size, size), ClassMask(size, size)};
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            double rd1, rd2;
            std::size_t region;
            two_nearest(regions, px, py, rd1, rd2, region);
            const std::uint8_t cls = region_class[region];
            tile.mask.at(y, x) = cls;

            double value;
            if (cls == kIntergranularId) {
                double gd1, gd2;
                std::size_t grain;
                two_nearest(grains, px, py, gd1, gd2, grain);
                const double ridge = std::exp(-(gd2 - gd1) / 1.2);
                value = grain_shade[grain] + 150.0 * ridge + (rng.uniform() - 0.5) * 30.0;
            } else {
                value = facet_base[region] + facet_gx[region] * (px - size / 2.0) +
                        facet_gy[region] * (py - size / 2.0) + (rng.uniform() - 0.5) * 10.0;
            }
            tile.image.at(y, x) = clamp_pixel(value);
        }
    }
    return tile;
}

std::vector<SyntheticTile> make_dataset(std::uint64_t seed, int count, int size) {
    std::vector<SyntheticTile> tiles;
    tiles.reserve(static_cast<std::size_t>(count));
    Rng root(seed);
    for (int i = 0; i < count; ++i) {
        Rng tile_rng = root.fork(static_cast<std::uint64_t>(i));
        tiles.push_back(make_tile(tile_rng, size));
    }
    return tiles;
}

} // namespace fracseg::synthetic
