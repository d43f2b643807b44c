#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "fracseg/image.hpp"
#include "fracseg/mask.hpp"
#include "fracseg/tensor.hpp"

namespace fracseg::quantify {

// Per-pixel argmax over the class channels; ties go to the lowest class id.
// Takes a single-image logits tensor; callers loop over batches.
ClassMask classify(const Tensor<float>& logits);

struct OverlayStyle {
    std::array<std::uint8_t, 3> intergranular{0, 0, 255}; // blue
    std::array<std::uint8_t, 3> transgranular{0, 255, 0}; // green
    double blend = 0.5;                                   // clamped to [0,1]
};

// Background and unlabeled pixels keep their grayscale value; mode pixels are
// alpha-blended with the class color.
image::RgbImage overlay(const image::GrayImage& img, const ClassMask& mask,
                        const OverlayStyle& style = {});

struct AreaFractions {
    std::int64_t intergranular_pixels = 0;
    std::int64_t transgranular_pixels = 0;
    std::optional<double> intergranular_fraction; // empty when no mode pixels
    std::optional<double> transgranular_fraction;
};

// Fractions over the evaluable pixels predicted as one of the two fracture
// modes; background never enters the denominator.
AreaFractions area_fractions(const ClassMask& mask, const BoolMask* evaluable = nullptr);

std::string area_fractions_to_json(const AreaFractions& fractions);

} // namespace fracseg::quantify
