#pragma once

// Reference implementations the tests compare the production kernels
// against. Everything here is written in the most literal form available
// (plain nested loops, scatter-adds, ray casts) and shares no code with the
// library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fracseg/mask.hpp"
#include "fracseg/rng.hpp"
#include "fracseg/tensor.hpp"

namespace oracle {

using fracseg::BoolMask;
using fracseg::ClassMask;
using fracseg::Dims4;
using fracseg::Tensor;

// Direct convolution:
//   out(n,co,oy,ox) = bias[co]
//     + sum_{ci,ky,kx} in(n, ci, oy*stride - pad + ky, ox*stride - pad + kx)
//                    * k(co, ci, ky, kx)
inline Tensor<double> conv2d(const Tensor<double>& in, const Tensor<double>& k,
                             const std::vector<double>& bias, int stride, int pad) {
    const auto& id = in.dims();
    const auto& kd = k.dims();
    const std::int64_t oh = (id.h + 2 * pad - kd.h) / stride + 1;
    const std::int64_t ow = (id.w + 2 * pad - kd.w) / stride + 1;
    Tensor<double> out(Dims4{id.n, kd.n, oh, ow});
    for (std::int64_t n = 0; n < id.n; ++n)
        for (std::int64_t co = 0; co < kd.n; ++co)
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
                    for (std::int64_t ci = 0; ci < kd.c; ++ci)
                        for (std::int64_t ky = 0; ky < kd.h; ++ky)
                            for (std::int64_t kx = 0; kx < kd.w; ++kx) {
                                const std::int64_t iy = oy * stride - pad + ky;
                                const std::int64_t ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= id.h || ix < 0 || ix >= id.w) continue;
                                acc += in.at(n, ci, iy, ix) * k.at(co, ci, ky, kx);
                            }
                    out.at(n, co, oy, ox) = acc;
                }
    return out;
}

// Transpose convolution as a scatter-add: every input element sprays
// kernel-weighted copies of itself into the output window it touches.
// Kernel layout (C_in, C_out, kH, kW).
inline Tensor<double> conv2d_transpose(const Tensor<double>& in, const Tensor<double>& k,
                                       const std::vector<double>& bias, int stride, int pad) {
    const auto& id = in.dims();
    const auto& kd = k.dims();
    const std::int64_t oh = (id.h - 1) * stride + kd.h - 2 * pad;
    const std::int64_t ow = (id.w - 1) * stride + kd.w - 2 * pad;
    Tensor<double> out(Dims4{id.n, kd.c, oh, ow});
    for (std::int64_t n = 0; n < id.n; ++n) {
        if (!bias.empty())
            for (std::int64_t co = 0; co < kd.c; ++co)
                for (std::int64_t y = 0; y < oh; ++y)
                    for (std::int64_t x = 0; x < ow; ++x)
                        out.at(n, co, y, x) = bias[static_cast<std::size_t>(co)];
        for (std::int64_t ci = 0; ci < id.c; ++ci)
            for (std::int64_t iy = 0; iy < id.h; ++iy)
                for (std::int64_t ix = 0; ix < id.w; ++ix)
                    for (std::int64_t co = 0; co < kd.c; ++co)
                        for (std::int64_t ky = 0; ky < kd.h; ++ky)
                            for (std::int64_t kx = 0; kx < kd.w; ++kx) {
                                const std::int64_t oy = iy * stride + ky - pad;
                                const std::int64_t ox = ix * stride + kx - pad;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                out.at(n, co, oy, ox) +=
                                    in.at(n, ci, iy, ix) * k.at(ci, co, ky, kx);
                            }
    }
    return out;
}

// Even-odd point-in-polygon by casting a ray toward +x. Intended for query
// points that do not lie exactly on an edge or vertex row.
inline bool point_in_polygon(double px, double py, const std::vector<double>& xs,
                             const std::vector<double>& ys) {
    bool inside = false;
    const std::size_t n = xs.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((ys[i] > py) == (ys[j] > py)) continue;
        const double x_at = xs[i] + (py - ys[i]) / (ys[j] - ys[i]) * (xs[j] - xs[i]);
        if (px < x_at) inside = !inside;
    }
    return inside;
}

// Brute-force confusion recount with the same pixel-admission rules the
// evaluator documents: an evaluable-mask zero drops the pixel, and
// exclude_void additionally drops ground-truth background and unlabeled
// pixels.
struct Confusion4 {
    std::int64_t m[4][4] = {};
};

inline int class_index(std::uint8_t id) { return id == 255 ? 3 : id; }

inline Confusion4 recount(const ClassMask& gt, const ClassMask& pred, const BoolMask* evaluable,
                          bool exclude_void) {
    Confusion4 c;
    for (int y = 0; y < gt.h; ++y)
        for (int x = 0; x < gt.w; ++x) {
            if (evaluable && evaluable->at(y, x) == 0) continue;
            const std::uint8_t g = gt.at(y, x);
            if (exclude_void && (g == 0 || g == 255)) continue;
            ++c.m[class_index(g)][class_index(pred.at(y, x))];
        }
    return c;
}

inline std::optional<double> iou_of(const Confusion4& c, int cls) {
    std::int64_t tp = c.m[cls][cls], fp = 0, fn = 0;
    for (int k = 0; k < 4; ++k) {
        if (k == cls) continue;
        fp += c.m[k][cls];
        fn += c.m[cls][k];
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) return std::nullopt;
    return double(tp) / double(denom);
}

inline std::optional<double> mean_iou_of(const Confusion4& c) {
    double sum = 0.0;
    int present = 0;
    for (int cls = 0; cls < 3; ++cls) {
        std::int64_t row = 0;
        for (int k = 0; k < 4; ++k) row += c.m[cls][k];
        if (row == 0) continue;
        ++present;
        sum += *iou_of(c, cls);
    }
    if (present == 0) return std::nullopt;
    return sum / present;
}

inline std::optional<double> f_beta_of(const Confusion4& c, int cls, double beta) {
    std::int64_t tp = c.m[cls][cls], fp = 0, fn = 0;
    for (int k = 0; k < 4; ++k) {
        if (k == cls) continue;
        fp += c.m[k][cls];
        fn += c.m[cls][k];
    }
    if (tp + fp + fn == 0) return std::nullopt;
    const double b2 = beta * beta;
    return (1.0 + b2) * double(tp) / ((1.0 + b2) * double(tp) + b2 * double(fn) + double(fp));
}

inline std::optional<double> accuracy_of(const Confusion4& c) {
    std::int64_t total = 0, hit = 0;
    for (int g = 0; g < 4; ++g)
        for (int p = 0; p < 4; ++p) {
            total += c.m[g][p];
            if (g == p) hit += c.m[g][p];
        }
    if (total == 0) return std::nullopt;
    return double(hit) / double(total);
}

// Relative error with a floor: differences below 1e-6 in absolute terms are
// at the noise level of double-precision central differences.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Symmetric difference quotient of an arbitrary scalar function with respect
// to one coordinate. The coordinate is restored afterwards.
inline double central_diff(const std::function<double()>& f, double* x, double h) {
    const double saved = *x;
    *x = saved + h;
    const double fp = f();
    *x = saved - h;
    const double fm = f();
    *x = saved;
    return (fp - fm) / (2.0 * h);
}

inline Tensor<double> random_tensor(fracseg::Rng& rng, Dims4 dims, double scale = 1.0) {
    Tensor<double> t(dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    return t;
}

} // namespace oracle
