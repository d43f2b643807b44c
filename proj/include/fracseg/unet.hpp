#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fracseg/ops.hpp"
#include "fracseg/tensor.hpp"

namespace fracseg::unet {

// Architecture description. The encoder follows the VGG16 stage layout
// (3x3 convs repeated per stage, each stage closed by a 2x2 pool); the
// decoder mirrors it with 2x2 stride-2 transpose convolutions and skip
// concatenations. Full scale matches the VGG16 widths; the desk scale keeps
// the same shape at a fraction of the parameter count for CPU work.
struct UNetConfig {
    int stages = 5;
    std::vector<int> encoder_channels = {64, 128, 256, 512, 512};
    std::vector<int> conv_repeats = {2, 2, 3, 3, 3};
    int num_classes = 3;
    int input_channels = 1;

    void validate() const;
    std::int64_t downsample_factor() const { return std::int64_t(1) << stages; }

    static UNetConfig full_scale() { return UNetConfig{}; }
    static UNetConfig desk_scale() {
        return UNetConfig{3, {8, 16, 32}, {2, 2, 3}, 3, 1};
    }

    bool operator==(const UNetConfig&) const = default;
};

// Spatial and channel dims of the bottleneck feature maps for a given input.
Dims4 bottleneck_dims(const UNetConfig& config, std::int64_t h, std::int64_t w);

template <typename T>
struct UNetModel {
    UNetConfig config;
    std::vector<std::vector<ops::ConvParams<T>>> enc; // [stage][conv]
    std::vector<ops::ConvParams<T>> up;               // [stage] transpose conv into that stage
    std::vector<std::vector<ops::ConvParams<T>>> dec; // [stage][conv]
    ops::ConvParams<T> classifier;                    // 1x1 conv to class logits
    std::set<std::string> frozen;                     // parameter names excluded from training
};

// Per-conv gradient pair; mirrors the model's parameter structure.
template <typename T>
struct ParamGrads {
    Tensor<T> kernel;
    std::vector<T> bias;
};

template <typename T>
struct UNetGradients {
    std::vector<std::vector<ParamGrads<T>>> enc;
    std::vector<ParamGrads<T>> up;
    std::vector<std::vector<ParamGrads<T>>> dec;
    ParamGrads<T> classifier;
};

// Flat view over one named parameter (or its gradient). rank is 4 for
// kernels, 1 for biases.
template <typename T>
struct ParamView {
    std::string name;
    T* data;
    std::size_t len;
    int rank;
    Dims4 dims;
};

// Activation caches needed by backward. Filled by forward when requested.
template <typename T>
struct ForwardContext {
    bool valid = false;
    Tensor<T> input;
    std::vector<std::vector<Tensor<T>>> enc_in;  // input of each encoder conv
    std::vector<std::vector<Tensor<T>>> enc_pre; // pre-activation output of each encoder conv
    std::vector<Tensor<T>> skips;                // stage output before pooling
    std::vector<ops::PoolIndices> pool_idx;
    std::vector<Tensor<T>> up_in;                // input of each transpose conv
    std::vector<std::vector<Tensor<T>>> dec_in;
    std::vector<std::vector<Tensor<T>>> dec_pre;
    Tensor<T> classifier_in;
};

// He-normal kernels from the seed, zero biases. Identical seeds give
// bit-identical parameters.
template <typename T>
UNetModel<T> build(const UNetConfig& config, std::uint64_t seed);

// Fully convolutional: any H, W divisible by 2^stages. Pass a context to
// enable a subsequent backward pass; inference runs without one.
template <typename T>
Tensor<T> forward(const UNetModel<T>& model, const Tensor<T>& input,
                  ForwardContext<T>* ctx = nullptr);

// Gradients for every trainable parameter; frozen parameters come back
// zeroed. Requires the context of a prior forward.
template <typename T>
UNetGradients<T> backward(const UNetModel<T>& model, const ForwardContext<T>& ctx,
                          const Tensor<T>& grad_logits);

template <typename T>
UNetGradients<T> zero_gradients(const UNetModel<T>& model);

// Stable parameter order: encoder stages ascending, decoder stages from the
// bottleneck up, classifier last. Kernel precedes bias within a layer.
// Names look like enc3.conv2.kernel, dec1.up.bias, classifier.kernel.
template <typename T>
std::vector<ParamView<T>> parameter_views(UNetModel<T>& model);

template <typename T>
std::vector<ParamView<const T>> parameter_views(const UNetModel<T>& model);

// Gradient views in exactly the parameter_views order.
template <typename T>
std::vector<ParamView<T>> gradient_views(const UNetModel<T>& model, UNetGradients<T>& grads);

template <typename T>
std::vector<std::string> parameter_names(const UNetModel<T>& model);

template <typename T>
std::int64_t parameter_count(const UNetModel<T>& model);

// Marks every encoder parameter frozen (or thaws them all).
template <typename T>
void set_encoder_frozen(UNetModel<T>& model, bool frozen);

template <typename From, typename To>
UNetModel<To> convert_model(const UNetModel<From>& model);

} // namespace fracseg::unet
