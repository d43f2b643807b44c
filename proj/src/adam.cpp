#include "fracseg/adam.hpp"

#include <cmath>
#include <string>

#include "fracseg/error.hpp"

namespace fracseg::optim {

template <typename T>
void adam_step(T* param, const T* grad, std::size_t len, AdamState<T>& state) {
    if (state.m.size() != len || state.v.size() != len) {
        throw ShapeError("adam_step: moment buffers hold " + std::to_string(state.m.size()) +
                         " entries, parameter has " + std::to_string(len));
    }
    if (state.hyper.check_finite) {
        for (std::size_t i = 0; i < len; ++i) {
            if (!std::isfinite(static_cast<double>(grad[i]))) {
                throw NumericError("adam_step: non-finite gradient at flat index " +
                                   std::to_string(i));
            }
        }
    }
    state.t += 1;
    const T b1 = static_cast<T>(state.hyper.beta1);
    const T b2 = static_cast<T>(state.hyper.beta2);
    const T lr = static_cast<T>(state.hyper.lr);
    const T eps = static_cast<T>(state.hyper.epsilon);
    const T bc1 = T(1) - static_cast<T>(std::pow(state.hyper.beta1, double(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(state.hyper.beta2, double(state.t)));

    for (std::size_t i = 0; i < len; ++i) {
        const T g = grad[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        const T m_hat = state.m[i] / bc1;
        const T v_hat = state.v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state) {
    if (param.dims() != grad.dims()) {
        throw ShapeError("adam_step: gradient dims " + grad.dims().str() +
                         " do not match parameter dims " + param.dims().str());
    }
    adam_step(param.data(), grad.data(), static_cast<std::size_t>(param.size()), state);
}

template void adam_step<float>(float*, const float*, std::size_t, AdamState<float>&);
template void adam_step<double>(double*, const double*, std::size_t, AdamState<double>&);
template void adam_step<float>(Tensor<float>&, const Tensor<float>&, AdamState<float>&);
template void adam_step<double>(Tensor<double>&, const Tensor<double>&, AdamState<double>&);

} // namespace fracseg::optim
