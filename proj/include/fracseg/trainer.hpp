#pragma once

#include <cstdint>
#include <vector>

#include "fracseg/adam.hpp"
#include "fracseg/dataset.hpp"
#include "fracseg/unet.hpp"

namespace fracseg::train {

struct StepStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Owns the per-parameter optimizer state for one model. step() runs
// forward, loss, backward and the Adam update; measure() evaluates a batch
// without touching the parameters. Frozen parameters are skipped entirely so
// their values and optimizer state never move.
class Trainer {
  public:
    Trainer(unet::UNetModel<float>& model, const optim::AdamHyper& hyper);

    StepStats step(const dataset::SampleBatch& batch);
    StepStats measure(const dataset::SampleBatch& batch) const;

    std::int64_t steps_taken() const { return steps_; }

  private:
    unet::UNetModel<float>* model_;
    std::vector<optim::AdamState<float>> states_;
    std::int64_t steps_ = 0;
};

} // namespace fracseg::train
