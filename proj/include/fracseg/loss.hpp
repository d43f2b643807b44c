#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fracseg/mask.hpp"
#include "fracseg/tensor.hpp"

namespace fracseg::optim {

// A batch of per-pixel class targets aligned to a logits tensor.
struct MaskBatch {
    std::int64_t n = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<std::uint8_t> ids;

    std::int64_t count() const { return n * h * w; }
    std::uint8_t at(std::int64_t ni, std::int64_t hi, std::int64_t wi) const {
        return ids[static_cast<std::size_t>((ni * h + hi) * w + wi)];
    }
};

template <typename T>
struct LossBatch {
    Tensor<T> logits; // (N, K, H, W)
    MaskBatch target; // (N, H, W), ids < K, or kUnlabeledId when ignored
};

template <typename T>
struct LossResult {
    T loss = T(0);
    Tensor<T> grad_logits;
    std::int64_t counted_pixels = 0;
};

// Mean over pixels of -log softmax(logits)[target]. Pixels whose target id is
// kUnlabeledId (255) are excluded from both loss and gradient; every other id
// must be < K. Gradient is (softmax - one_hot) / counted_pixels.
template <typename T>
LossResult<T> cross_entropy_loss(const LossBatch<T>& batch);

// Fraction of pixels whose argmax channel equals the target, over all pixels
// with a real target id (kUnlabeledId pixels are skipped).
template <typename T>
double pixel_accuracy(const LossBatch<T>& batch);

} // namespace fracseg::optim
