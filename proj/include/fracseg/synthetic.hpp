#pragma once

#include <cstdint>
#include <vector>

#include "fracseg/image.hpp"
#include "fracseg/mask.hpp"
#include "fracseg/rng.hpp"

namespace fracseg::synthetic {

struct SyntheticTile {
    image::GrayImage image;
    ClassMask mask;
};

// One fully labeled tile. A coarse Voronoi partition assigns each region a
// fracture mode; intergranular regions render as a fine Voronoi-edge ridge
// texture (faceted grains with bright boundaries), transgranular regions as
// smooth per-facet intensity gradients.
SyntheticTile make_tile(Rng& rng, int size);

std::vector<SyntheticTile> make_dataset(std::uint64_t seed, int count, int size);

} // namespace fracseg::synthetic
