#include "fracseg/loss.hpp"

#include <cmath>
#include <string>

#include "fracseg/error.hpp"

namespace fracseg::optim {

namespace {

template <typename T>
void check_batch(const LossBatch<T>& batch, const char* op) {
    const Dims4& d = batch.logits.dims();
    if (batch.target.n != d.n || batch.target.h != d.h || batch.target.w != d.w) {
        throw ShapeError(std::string(op) + ": target (" + std::to_string(batch.target.n) + "," +
                         std::to_string(batch.target.h) + "," + std::to_string(batch.target.w) +
                         ") does not align with logits " + d.str());
    }
    if (static_cast<std::int64_t>(batch.target.ids.size()) != batch.target.count()) {
        throw ShapeError(std::string(op) + ": target id buffer length mismatch");
    }
}

} // namespace

template <typename T>
LossResult<T> cross_entropy_loss(const LossBatch<T>& batch) {
    check_batch(batch, "cross_entropy_loss");
    const Dims4& d = batch.logits.dims();
    const std::int64_t plane = d.h * d.w;

    LossResult<T> res;
    res.grad_logits = Tensor<T>(d);

    // first pass: count pixels that carry a target, validate ids
    std::int64_t counted = 0;
    for (std::size_t i = 0; i < batch.target.ids.size(); ++i) {
        const std::uint8_t id = batch.target.ids[i];
        if (id == kUnlabeledId) continue;
        if (id >= d.c) {
            throw DataError("cross_entropy_loss: target id " + std::to_string(int(id)) +
                            " out of range for " + std::to_string(d.c) + " logit channels");
        }
        ++counted;
    }
    res.counted_pixels = counted;
    if (counted == 0) return res;

    const T inv_count = T(1) / static_cast<T>(counted);
    double loss_sum = 0.0; // accumulate at double even in the float path

    for (std::int64_t n = 0; n < d.n; ++n) {
        const T* lg = batch.logits.plane(n, 0);
        T* gr = res.grad_logits.plane(n, 0);
        for (std::int64_t i = 0; i < plane; ++i) {
            const std::uint8_t id =
                batch.target.ids[static_cast<std::size_t>(n * plane + i)];
            if (id == kUnlabeledId) continue;

            T m = lg[i];
            for (std::int64_t c = 1; c < d.c; ++c) m = std::max(m, lg[c * plane + i]);
            T sum = 0;
            for (std::int64_t c = 0; c < d.c; ++c) sum += std::exp(lg[c * plane + i] - m);
            const T log_sum = std::log(sum) + m;
            loss_sum += static_cast<double>(log_sum - lg[id * plane + i]);

            const T inv_sum = T(1) / sum;
            for (std::int64_t c = 0; c < d.c; ++c) {
                T p = std::exp(lg[c * plane + i] - m) * inv_sum;
                if (c == id) p -= T(1);
                gr[c * plane + i] = p * inv_count;
            }
        }
    }
    res.loss = static_cast<T>(loss_sum / static_cast<double>(counted));
    return res;
}

template <typename T>
double pixel_accuracy(const LossBatch<T>& batch) {
    check_batch(batch, "pixel_accuracy");
    const Dims4& d = batch.logits.dims();
    const std::int64_t plane = d.h * d.w;

    std::int64_t counted = 0;
    std::int64_t correct = 0;
    for (std::int64_t n = 0; n < d.n; ++n) {
        const T* lg = batch.logits.plane(n, 0);
        for (std::int64_t i = 0; i < plane; ++i) {
            const std::uint8_t id =
                batch.target.ids[static_cast<std::size_t>(n * plane + i)];
            if (id == kUnlabeledId) continue;
            ++counted;
            std::int64_t arg = 0;
            T best = lg[i];
            for (std::int64_t c = 1; c < d.c; ++c) {
                if (lg[c * plane + i] > best) {
                    best = lg[c * plane + i];
                    arg = c;
                }
            }
            if (arg == id) ++correct;
        }
    }
    if (counted == 0) return 0.0;
    return static_cast<double>(correct) / static_cast<double>(counted);
}

template LossResult<float> cross_entropy_loss<float>(const LossBatch<float>&);
template LossResult<double> cross_entropy_loss<double>(const LossBatch<double>&);
template double pixel_accuracy<float>(const LossBatch<float>&);
template double pixel_accuracy<double>(const LossBatch<double>&);

} // namespace fracseg::optim
