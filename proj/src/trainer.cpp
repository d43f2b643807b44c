#include "fracseg/trainer.hpp"

#include <cmath>
#include <utility>

#include "fracseg/error.hpp"
#include "fracseg/loss.hpp"

namespace fracseg::train {

Trainer::Trainer(unet::UNetModel<float>& model, const optim::AdamHyper& hyper) : model_(&model) {
    for (const auto& view : unet::parameter_views(std::as_const(model))) {
        states_.emplace_back(view.len, hyper);
    }
}

StepStats Trainer::step(const dataset::SampleBatch& batch) {
    unet::ForwardContext<float> ctx;
    Tensor<float> logits = unet::forward(*model_, batch.input, &ctx);
    optim::LossBatch<float> loss_batch{std::move(logits), batch.target};
    const auto result = optim::cross_entropy_loss(loss_batch);
    if (!std::isfinite(result.loss)) {
        throw NumericError("non-finite training loss at step " + std::to_string(steps_ + 1));
    }
    const double acc = optim::pixel_accuracy(loss_batch);

    auto grads = unet::backward(*model_, ctx, result.grad_logits);
    auto views = unet::parameter_views(*model_);
    auto grad_views = unet::gradient_views(*model_, grads);
    for (std::size_t i = 0; i < views.size(); ++i) {
        if (model_->frozen.count(views[i].name)) continue;
        optim::adam_step(views[i].data, grad_views[i].data, views[i].len, states_[i]);
    }
    ++steps_;
    return {static_cast<double>(result.loss), acc};
}

StepStats Trainer::measure(const dataset::SampleBatch& batch) const {
    Tensor<float> logits = unet::forward(*model_, batch.input);
    optim::LossBatch<float> loss_batch{std::move(logits), batch.target};
    const auto result = optim::cross_entropy_loss(loss_batch);
    return {static_cast<double>(result.loss), optim::pixel_accuracy(loss_batch)};
}

} // namespace fracseg::train
