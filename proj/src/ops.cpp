#include "fracseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fracseg::ops {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return (a >= 0) ? a / b : -((-a + b - 1) / b);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return (a >= 0) ? (a + b - 1) / b : -((-a) / b);
}

// Output index range [lo, hi) such that 0 <= o*stride + offset < extent.
struct Range {
    std::int64_t lo;
    std::int64_t hi;
};

Range valid_range(std::int64_t out_extent, std::int64_t in_extent, std::int64_t offset,
                  std::int64_t stride) {
    Range r;
    r.lo = std::max<std::int64_t>(0, ceil_div(-offset, stride));
    r.hi = std::min(out_extent, floor_div(in_extent - 1 - offset, stride) + 1);
    if (r.hi < r.lo) r.hi = r.lo;
    return r;
}

void check_conv_args(const Dims4& input, const Dims4& kernel, const std::size_t bias_len,
                     std::int64_t c_in_axis, int stride, int pad, const char* op) {
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
    if (pad < 0) throw ShapeError(std::string(op) + ": padding must be >= 0");
    if (kernel.h < 1 || kernel.w < 1) {
        throw ShapeError(std::string(op) + ": kernel spatial dims must be >= 1, got " +
                         kernel.str());
    }
    const std::int64_t expect_cin = (c_in_axis == 1) ? kernel.c : kernel.n;
    if (input.c != expect_cin) {
        throw ShapeError(std::string(op) + ": channel axis mismatch: input has C=" +
                         std::to_string(input.c) + ", kernel expects C_in=" +
                         std::to_string(expect_cin));
    }
    const std::int64_t c_out = (c_in_axis == 1) ? kernel.n : kernel.c;
    if (bias_len != 0 && static_cast<std::int64_t>(bias_len) != c_out) {
        throw ShapeError(std::string(op) + ": bias axis mismatch: bias has " +
                         std::to_string(bias_len) + " entries, kernel has C_out=" +
                         std::to_string(c_out));
    }
}

void check_grad_out(const Dims4& got, const Dims4& want, const char* op) {
    if (got != want) {
        throw ShapeError(std::string(op) + ": grad_out dims " + got.str() +
                         " do not match forward output dims " + want.str());
    }
}

// Fixed-tree dot product: four independent accumulator chains combined in a
// set order, so the result is reproducible run to run.
template <typename T, typename Load>
T strided_dot(std::int64_t n, const T* a, Load load_b) {
    T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    std::int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * load_b(i);
        acc1 += a[i + 1] * load_b(i + 1);
        acc2 += a[i + 2] * load_b(i + 2);
        acc3 += a[i + 3] * load_b(i + 3);
    }
    T tail = 0;
    for (; i < n; ++i) tail += a[i] * load_b(i);
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

} // namespace

Dims4 conv2d_output_dims(const Dims4& input, const Dims4& kernel, int stride, int pad) {
    const std::int64_t oh = (input.h + 2 * pad - kernel.h) / stride + 1;
    const std::int64_t ow = (input.w + 2 * pad - kernel.w) / stride + 1;
    if (oh < 1 || ow < 1) {
        throw ShapeError("conv2d: kernel " + kernel.str() + " does not fit input " +
                         input.str() + " with pad " + std::to_string(pad));
    }
    return {input.n, kernel.n, oh, ow};
}

Dims4 conv2d_transpose_output_dims(const Dims4& input, const Dims4& kernel, int stride, int pad) {
    const std::int64_t oh = (input.h - 1) * stride + kernel.h - 2 * pad;
    const std::int64_t ow = (input.w - 1) * stride + kernel.w - 2 * pad;
    if (oh < 1 || ow < 1) {
        throw ShapeError("conv2d_transpose: output dims collapse for input " + input.str());
    }
    return {input.n, kernel.c, oh, ow};
}

Dims4 maxpool2x2_output_dims(const Dims4& input) {
    if (input.h % 2 != 0 || input.w % 2 != 0) {
        throw ShapeError("maxpool2x2: H and W must be even, got " + input.str());
    }
    return {input.n, input.c, input.h / 2, input.w / 2};
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& params) {
    const Dims4& id = input.dims();
    const Dims4& kd = params.kernel.dims();
    check_conv_args(id, kd, params.bias.size(), 1, params.stride, params.pad, "conv2d");
    const Dims4 od = conv2d_output_dims(id, kd, params.stride, params.pad);
    const std::int64_t s = params.stride, p = params.pad;

    Tensor<T> out(od);
    for (std::int64_t n = 0; n < od.n; ++n) {
        for (std::int64_t co = 0; co < od.c; ++co) {
            T* out_p = out.plane(n, co);
            const T b = params.bias.empty() ? T(0) : params.bias[static_cast<std::size_t>(co)];
            std::fill(out_p, out_p + od.h * od.w, b);
            for (std::int64_t ci = 0; ci < id.c; ++ci) {
                const T* in_p = input.plane(n, ci);
                const T* k_p = params.kernel.plane(co, ci);
                for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                    const std::int64_t dh = kh - p;
                    const Range rh = valid_range(od.h, id.h, dh, s);
                    for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                        const T k = k_p[kh * kd.w + kw];
                        const std::int64_t dw = kw - p;
                        const Range rw = valid_range(od.w, id.w, dw, s);
                        if (s == 1) {
                            for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const T* src = in_p + (oh + dh) * id.w + dw;
                                T* dst = out_p + oh * od.w;
                                for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) {
                                    dst[ow] += k * src[ow];
                                }
                            }
                        } else {
                            for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const T* src = in_p + (oh * s + dh) * id.w + dw;
                                T* dst = out_p + oh * od.w;
                                for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) {
                                    dst[ow] += k * src[ow * s];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& params,
                             const Tensor<T>& grad_out) {
    const Dims4& id = input.dims();
    const Dims4& kd = params.kernel.dims();
    check_conv_args(id, kd, params.bias.size(), 1, params.stride, params.pad, "conv2d_backward");
    const Dims4 od = conv2d_output_dims(id, kd, params.stride, params.pad);
    check_grad_out(grad_out.dims(), od, "conv2d_backward");
    const std::int64_t s = params.stride, p = params.pad;

    ConvGrads<T> g{Tensor<T>(id), Tensor<T>(kd),
                   std::vector<T>(params.bias.empty() ? 0 : static_cast<std::size_t>(kd.n),
                                  T(0))};

    // bias: plain sum of grad_out per output channel
    if (!g.bias.empty()) {
        for (std::int64_t n = 0; n < od.n; ++n) {
            for (std::int64_t co = 0; co < od.c; ++co) {
                const T* go_p = grad_out.plane(n, co);
                T acc = 0;
                for (std::int64_t i = 0; i < od.h * od.w; ++i) acc += go_p[i];
                g.bias[static_cast<std::size_t>(co)] += acc;
            }
        }
    }

    // kernel: correlation of grad_out with the input window
    for (std::int64_t co = 0; co < kd.n; ++co) {
        for (std::int64_t ci = 0; ci < kd.c; ++ci) {
            T* gk_p = g.kernel.plane(co, ci);
            for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                const std::int64_t dh = kh - p;
                const Range rh = valid_range(od.h, id.h, dh, s);
                for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                    const std::int64_t dw = kw - p;
                    const Range rw = valid_range(od.w, id.w, dw, s);
                    T acc = 0;
                    for (std::int64_t n = 0; n < od.n; ++n) {
                        const T* go_p = grad_out.plane(n, co);
                        const T* in_p = input.plane(n, ci);
                        for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                            const T* go_row = go_p + oh * od.w + rw.lo;
                            const T* in_row = in_p + (oh * s + dh) * id.w + rw.lo * s + dw;
                            acc += strided_dot(rw.hi - rw.lo, go_row,
                                               [&](std::int64_t i) { return in_row[i * s]; });
                        }
                    }
                    gk_p[kh * kd.w + kw] = acc;
                }
            }
        }
    }

    // input: for stride 1 a gather over shifted grad_out rows, otherwise a
    // scatter over output positions; both traversals are order-fixed.
    if (s == 1) {
        for (std::int64_t n = 0; n < id.n; ++n) {
            for (std::int64_t ci = 0; ci < id.c; ++ci) {
                T* gi_p = g.input.plane(n, ci);
                for (std::int64_t co = 0; co < kd.n; ++co) {
                    const T* go_p = grad_out.plane(n, co);
                    const T* k_p = params.kernel.plane(co, ci);
                    for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                        const std::int64_t dh = kh - p;
                        const Range rh = valid_range(od.h, id.h, dh, 1);
                        for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                            const T k = k_p[kh * kd.w + kw];
                            const std::int64_t dw = kw - p;
                            const Range rw = valid_range(od.w, id.w, dw, 1);
                            for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const T* src = go_p + oh * od.w;
                                T* dst = gi_p + (oh + dh) * id.w + dw;
                                for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) {
                                    dst[ow] += k * src[ow];
                                }
                            }
                        }
                    }
                }
            }
        }
    } else {
        for (std::int64_t n = 0; n < id.n; ++n) {
            for (std::int64_t co = 0; co < kd.n; ++co) {
                const T* go_p = grad_out.plane(n, co);
                for (std::int64_t ci = 0; ci < id.c; ++ci) {
                    T* gi_p = g.input.plane(n, ci);
                    const T* k_p = params.kernel.plane(co, ci);
                    for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                        const std::int64_t dh = kh - p;
                        const Range rh = valid_range(od.h, id.h, dh, s);
                        for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                            const T k = k_p[kh * kd.w + kw];
                            const std::int64_t dw = kw - p;
                            const Range rw = valid_range(od.w, id.w, dw, s);
                            for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const T* src = go_p + oh * od.w;
                                T* dst = gi_p + (oh * s + dh) * id.w + dw;
                                for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) {
                                    dst[ow * s] += k * src[ow];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> conv2d_transpose_forward(const Tensor<T>& input, const ConvParams<T>& params) {
    const Dims4& id = input.dims();
    const Dims4& kd = params.kernel.dims();
    check_conv_args(id, kd, params.bias.size(), 0, params.stride, params.pad, "conv2d_transpose");
    const Dims4 od = conv2d_transpose_output_dims(id, kd, params.stride, params.pad);
    const std::int64_t s = params.stride, p = params.pad;

    Tensor<T> out(od);
    for (std::int64_t n = 0; n < od.n; ++n) {
        for (std::int64_t co = 0; co < od.c; ++co) {
            T* out_p = out.plane(n, co);
            const T b = params.bias.empty() ? T(0) : params.bias[static_cast<std::size_t>(co)];
            std::fill(out_p, out_p + od.h * od.w, b);
        }
        for (std::int64_t ci = 0; ci < id.c; ++ci) {
            const T* in_p = input.plane(n, ci);
            for (std::int64_t co = 0; co < od.c; ++co) {
                T* out_p = out.plane(n, co);
                const T* k_p = params.kernel.plane(ci, co);
                for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                    const std::int64_t dh = kh - p;
                    const Range rh = valid_range(id.h, od.h, dh, s);
                    for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                        const T k = k_p[kh * kd.w + kw];
                        const std::int64_t dw = kw - p;
                        const Range rw = valid_range(id.w, od.w, dw, s);
                        for (std::int64_t ih = rh.lo; ih < rh.hi; ++ih) {
                            const T* src = in_p + ih * id.w;
                            T* dst = out_p + (ih * s + dh) * od.w + dw;
                            for (std::int64_t iw = rw.lo; iw < rw.hi; ++iw) {
                                dst[iw * s] += k * src[iw];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_transpose_backward(const Tensor<T>& input, const ConvParams<T>& params,
                                       const Tensor<T>& grad_out) {
    const Dims4& id = input.dims();
    const Dims4& kd = params.kernel.dims();
    check_conv_args(id, kd, params.bias.size(), 0, params.stride, params.pad,
                    "conv2d_transpose_backward");
    const Dims4 od = conv2d_transpose_output_dims(id, kd, params.stride, params.pad);
    check_grad_out(grad_out.dims(), od, "conv2d_transpose_backward");
    const std::int64_t s = params.stride, p = params.pad;

    ConvGrads<T> g{Tensor<T>(id), Tensor<T>(kd),
                   std::vector<T>(params.bias.empty() ? 0 : static_cast<std::size_t>(kd.c),
                                  T(0))};

    if (!g.bias.empty()) {
        for (std::int64_t n = 0; n < od.n; ++n) {
            for (std::int64_t co = 0; co < od.c; ++co) {
                const T* go_p = grad_out.plane(n, co);
                T acc = 0;
                for (std::int64_t i = 0; i < od.h * od.w; ++i) acc += go_p[i];
                g.bias[static_cast<std::size_t>(co)] += acc;
            }
        }
    }

    for (std::int64_t ci = 0; ci < kd.n; ++ci) {
        for (std::int64_t co = 0; co < kd.c; ++co) {
            T* gk_p = g.kernel.plane(ci, co);
            for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                const std::int64_t dh = kh - p;
                const Range rh = valid_range(id.h, od.h, dh, s);
                for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                    const std::int64_t dw = kw - p;
                    const Range rw = valid_range(id.w, od.w, dw, s);
                    T acc = 0;
                    for (std::int64_t n = 0; n < id.n; ++n) {
                        const T* in_p = input.plane(n, ci);
                        const T* go_p = grad_out.plane(n, co);
                        for (std::int64_t ih = rh.lo; ih < rh.hi; ++ih) {
                            const T* in_row = in_p + ih * id.w + rw.lo;
                            const T* go_row = go_p + (ih * s + dh) * od.w + rw.lo * s + dw;
                            acc += strided_dot(rw.hi - rw.lo, in_row,
                                               [&](std::int64_t i) { return go_row[i * s]; });
                        }
                    }
                    gk_p[kh * kd.w + kw] = acc;
                }
            }
        }
    }

    for (std::int64_t n = 0; n < id.n; ++n) {
        for (std::int64_t ci = 0; ci < id.c; ++ci) {
            T* gi_p = g.input.plane(n, ci);
            for (std::int64_t co = 0; co < kd.c; ++co) {
                const T* go_p = grad_out.plane(n, co);
                const T* k_p = params.kernel.plane(ci, co);
                for (std::int64_t kh = 0; kh < kd.h; ++kh) {
                    const std::int64_t dh = kh - p;
                    const Range rh = valid_range(id.h, od.h, dh, s);
                    for (std::int64_t kw = 0; kw < kd.w; ++kw) {
                        const T k = k_p[kh * kd.w + kw];
                        const std::int64_t dw = kw - p;
                        const Range rw = valid_range(id.w, od.w, dw, s);
                        for (std::int64_t ih = rh.lo; ih < rh.hi; ++ih) {
                            const T* src = go_p + (ih * s + dh) * od.w + dw;
                            T* dst = gi_p + ih * id.w;
                            for (std::int64_t iw = rw.lo; iw < rw.hi; ++iw) {
                                dst[iw] += k * src[iw * s];
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
std::pair<Tensor<T>, PoolIndices> maxpool2x2_forward(const Tensor<T>& input) {
    const Dims4& id = input.dims();
    const Dims4 od = maxpool2x2_output_dims(id);

    Tensor<T> out(od);
    PoolIndices idx;
    idx.input_dims = id;
    idx.argmax.resize(static_cast<std::size_t>(od.count()));

    std::size_t o = 0;
    for (std::int64_t n = 0; n < od.n; ++n) {
        for (std::int64_t c = 0; c < od.c; ++c) {
            const T* in_p = input.plane(n, c);
            const std::int64_t base = input.index(n, c, 0, 0);
            T* out_p = out.plane(n, c);
            for (std::int64_t oh = 0; oh < od.h; ++oh) {
                for (std::int64_t ow = 0; ow < od.w; ++ow) {
                    // scan order: (0,0), (0,1), (1,0), (1,1); ties keep the
                    // first element seen (strict > below)
                    const std::int64_t top = 2 * oh * id.w + 2 * ow;
                    const std::int64_t cand[4] = {top, top + 1, top + id.w, top + id.w + 1};
                    std::int64_t best = cand[0];
                    T best_v = in_p[cand[0]];
                    for (int i = 1; i < 4; ++i) {
                        if (in_p[cand[i]] > best_v) {
                            best_v = in_p[cand[i]];
                            best = cand[i];
                        }
                    }
                    out_p[oh * od.w + ow] = best_v;
                    idx.argmax[o++] = static_cast<std::uint32_t>(base + best);
                }
            }
        }
    }
    return {std::move(out), std::move(idx)};
}

template <typename T>
Tensor<T> maxpool2x2_backward(const PoolIndices& indices, const Tensor<T>& grad_out) {
    const Dims4 od = maxpool2x2_output_dims(indices.input_dims);
    check_grad_out(grad_out.dims(), od, "maxpool2x2_backward");
    if (indices.argmax.size() != static_cast<std::size_t>(od.count())) {
        throw ShapeError("maxpool2x2_backward: stale indices: have " +
                         std::to_string(indices.argmax.size()) + " entries, expected " +
                         std::to_string(od.count()));
    }
    Tensor<T> grad_in(indices.input_dims);
    for (std::size_t i = 0; i < indices.argmax.size(); ++i) {
        grad_in[static_cast<std::int64_t>(indices.argmax[i])] +=
            grad_out[static_cast<std::int64_t>(i)];
    }
    return grad_in;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out(input.dims());
    const T* src = input.data();
    T* dst = out.data();
    for (std::int64_t i = 0; i < input.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    check_grad_out(grad_out.dims(), input.dims(), "relu_backward");
    Tensor<T> grad_in(input.dims());
    const T* x = input.data();
    const T* go = grad_out.data();
    T* gi = grad_in.data();
    for (std::int64_t i = 0; i < input.size(); ++i) gi[i] = x[i] > T(0) ? go[i] : T(0);
    return grad_in;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input) {
    const Dims4& d = input.dims();
    if (d.c < 2) {
        throw ShapeError("softmax_channels: need C >= 2, got " + d.str());
    }
    Tensor<T> out(d);
    const std::int64_t plane = d.h * d.w;
    for (std::int64_t n = 0; n < d.n; ++n) {
        const T* in_p = input.plane(n, 0);
        T* out_p = out.plane(n, 0);
        for (std::int64_t i = 0; i < plane; ++i) {
            T m = in_p[i];
            for (std::int64_t c = 1; c < d.c; ++c) m = std::max(m, in_p[c * plane + i]);
            T sum = 0;
            for (std::int64_t c = 0; c < d.c; ++c) {
                const T e = std::exp(in_p[c * plane + i] - m);
                out_p[c * plane + i] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (std::int64_t c = 0; c < d.c; ++c) out_p[c * plane + i] *= inv;
        }
    }
    return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    const Dims4& da = a.dims();
    const Dims4& db = b.dims();
    if (da.n != db.n || da.h != db.h || da.w != db.w) {
        throw ShapeError("concat_channels: spatial/batch mismatch between " + da.str() +
                         " and " + db.str());
    }
    Tensor<T> out({da.n, da.c + db.c, da.h, da.w});
    const std::int64_t plane = da.h * da.w;
    for (std::int64_t n = 0; n < da.n; ++n) {
        std::copy(a.plane(n, 0), a.plane(n, 0) + da.c * plane, out.plane(n, 0));
        std::copy(b.plane(n, 0), b.plane(n, 0) + db.c * plane, out.plane(n, da.c));
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::int64_t c_first) {
    const Dims4& d = x.dims();
    if (c_first < 0 || c_first > d.c) {
        throw ShapeError("split_channels: split point " + std::to_string(c_first) +
                         " out of range for " + d.str());
    }
    Tensor<T> a({d.n, c_first, d.h, d.w});
    Tensor<T> b({d.n, d.c - c_first, d.h, d.w});
    const std::int64_t plane = d.h * d.w;
    for (std::int64_t n = 0; n < d.n; ++n) {
        std::copy(x.plane(n, 0), x.plane(n, 0) + c_first * plane, a.plane(n, 0));
        std::copy(x.plane(n, c_first), x.plane(n, c_first) + (d.c - c_first) * plane,
                  b.plane(n, 0));
    }
    return {std::move(a), std::move(b)};
}

#define FRACSEG_INSTANTIATE_OPS(T)                                                              \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvParams<T>&);               \
    template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const ConvParams<T>&,            \
                                             const Tensor<T>&);                                 \
    template Tensor<T> conv2d_transpose_forward<T>(const Tensor<T>&, const ConvParams<T>&);     \
    template ConvGrads<T> conv2d_transpose_backward<T>(const Tensor<T>&, const ConvParams<T>&,  \
                                                       const Tensor<T>&);                       \
    template std::pair<Tensor<T>, PoolIndices> maxpool2x2_forward<T>(const Tensor<T>&);         \
    template Tensor<T> maxpool2x2_backward<T>(const PoolIndices&, const Tensor<T>&);            \
    template Tensor<T> relu_forward<T>(const Tensor<T>&);                                       \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> softmax_channels<T>(const Tensor<T>&);                                   \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                  \
    template std::pair<Tensor<T>, Tensor<T>> split_channels<T>(const Tensor<T>&, std::int64_t);

FRACSEG_INSTANTIATE_OPS(float)
FRACSEG_INSTANTIATE_OPS(double)

} // namespace fracseg::ops
