#include "fracseg/quantify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "fracseg/error.hpp"

namespace fracseg::quantify {

ClassMask classify(const Tensor<float>& logits) {
    const Dims4& d = logits.dims();
    if (d.n != 1) {
        throw ShapeError("classify: expected a single-image logits tensor, got batch " +
                         std::to_string(d.n));
    }
    if (d.c < 2 || d.c > 255) {
        throw ShapeError("classify: channel count " + std::to_string(d.c) +
                         " is not a class axis");
    }
    ClassMask mask(static_cast<int>(d.h), static_cast<int>(d.w));
    const std::int64_t plane = d.h * d.w;
    const float* base = logits.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        int best = 0;
        float best_value = base[p];
        for (std::int64_t c = 1; c < d.c; ++c) {
            const float value = base[c * plane + p];
            if (value > best_value) {
                best_value = value;
                best = static_cast<int>(c);
            }
        }
        mask.ids[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
    }
    return mask;
}

image::RgbImage overlay(const image::GrayImage& img, const ClassMask& mask,
                        const OverlayStyle& style) {
    if (img.h != mask.h || img.w != mask.w) {
        throw ShapeError("overlay: image is " + std::to_string(img.h) + "x" +
                         std::to_string(img.w) + ", mask is " + std::to_string(mask.h) + "x" +
                         std::to_string(mask.w));
    }
    const double blend = std::clamp(style.blend, 0.0, 1.0);
    image::RgbImage out(img.h, img.w);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const std::uint8_t gray = img.pixels[i];
        std::uint8_t* dst = out.pixels.data() + i * 3;
        const std::uint8_t id = mask.ids[i];
        const std::array<std::uint8_t, 3>* color = nullptr;
        if (id == kIntergranularId) color = &style.intergranular;
        if (id == kTransgranularId) color = &style.transgranular;
        if (!color) {
            dst[0] = dst[1] = dst[2] = gray;
            continue;
        }
        for (int ch = 0; ch < 3; ++ch) {
            const double value = (1.0 - blend) * gray + blend * (*color)[ch];
            dst[ch] = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 255.0)));
        }
    }
    return out;
}

AreaFractions area_fractions(const ClassMask& mask, const BoolMask* evaluable) {
    if (evaluable && (evaluable->h != mask.h || evaluable->w != mask.w)) {
        throw ShapeError("area_fractions: evaluable mask dims disagree with the mask");
    }
    AreaFractions out;
    for (std::size_t i = 0; i < mask.ids.size(); ++i) {
        if (evaluable && !evaluable->v[i]) continue;
        if (mask.ids[i] == kIntergranularId) ++out.intergranular_pixels;
        if (mask.ids[i] == kTransgranularId) ++out.transgranular_pixels;
    }
    const std::int64_t total = out.intergranular_pixels + out.transgranular_pixels;
    if (total > 0) {
        out.intergranular_fraction = double(out.intergranular_pixels) / double(total);
        out.transgranular_fraction = double(out.transgranular_pixels) / double(total);
    }
    return out;
}

std::string area_fractions_to_json(const AreaFractions& fractions) {
    nlohmann::json j = {
        {"intergranular_pixels", fractions.intergranular_pixels},
        {"transgranular_pixels", fractions.transgranular_pixels},
        {"intergranular_fraction", fractions.intergranular_fraction
                                       ? nlohmann::json(*fractions.intergranular_fraction)
                                       : nlohmann::json(nullptr)},
        {"transgranular_fraction", fractions.transgranular_fraction
                                       ? nlohmann::json(*fractions.transgranular_fraction)
                                       : nlohmann::json(nullptr)},
    };
    return j.dump(2);
}

} // namespace fracseg::quantify
