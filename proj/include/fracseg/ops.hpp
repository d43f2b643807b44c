#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fracseg/tensor.hpp"

namespace fracseg::ops {

// Parameters of a (transpose) convolution layer.
//
// Kernel layout:
//   conv2d:           (C_out, C_in, kH, kW)
//   conv2d_transpose: (C_in, C_out, kH, kW)
// The two layouts share memory shape, so a conv kernel tensor reinterpreted
// as a transpose kernel gives exactly the adjoint operator.
template <typename T>
struct ConvParams {
    Tensor<T> kernel;
    std::vector<T> bias;
    int stride = 1;
    int pad = 0;
};

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> kernel;
    std::vector<T> bias;
};

// Argmax bookkeeping from maxpool2x2_forward. `argmax` holds, per output
// element, the flat index of the winning input element.
struct PoolIndices {
    Dims4 input_dims;
    std::vector<std::uint32_t> argmax;
};

Dims4 conv2d_output_dims(const Dims4& input, const Dims4& kernel, int stride, int pad);
Dims4 conv2d_transpose_output_dims(const Dims4& input, const Dims4& kernel, int stride, int pad);
Dims4 maxpool2x2_output_dims(const Dims4& input);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& params);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& params,
                             const Tensor<T>& grad_out);

template <typename T>
Tensor<T> conv2d_transpose_forward(const Tensor<T>& input, const ConvParams<T>& params);

template <typename T>
ConvGrads<T> conv2d_transpose_backward(const Tensor<T>& input, const ConvParams<T>& params,
                                       const Tensor<T>& grad_out);

template <typename T>
std::pair<Tensor<T>, PoolIndices> maxpool2x2_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2x2_backward(const PoolIndices& indices, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

// `input` is the pre-activation tensor from the forward pass. Gradient at
// exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

// Per-pixel softmax over the channel axis, max-subtracted for stability.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input);

// Output holds a's channels first. split_channels is the matching backward.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::int64_t c_first);

} // namespace fracseg::ops
