#pragma once

#include <cstdint>
#include <vector>

#include "fracseg/tensor.hpp"

namespace fracseg::optim {

struct AdamHyper {
    double lr = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool check_finite = true; // reject non-finite gradients before touching state
};

// Per-parameter Adam state. Moment buffers match the parameter length; the
// step counter advances by exactly one per adam_step call.
template <typename T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    std::int64_t t = 0;
    AdamHyper hyper;

    AdamState() = default;
    AdamState(std::size_t param_len, AdamHyper h)
        : m(param_len, T(0)), v(param_len, T(0)), hyper(h) {}
};

// Standard Adam update with bias correction:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
//   param -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(T* param, const T* grad, std::size_t len, AdamState<T>& state);

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state);

} // namespace fracseg::optim
