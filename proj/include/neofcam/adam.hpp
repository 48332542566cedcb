#pragma once

#include "neofcam/diff.hpp"

#include <span>
#include <vector>

namespace neofcam {

// Step-decay schedule: initial * decay^floor(step / interval).
struct LearningRateSchedule {
  double initial = 1e-3;
  double decay = 0.95;
  std::size_t interval = 50;

  double at(std::size_t step) const;
};

// Moments are kept per parameter slot (the position of the tensor in the
// list passed to adam_step), so the same list order must be used on every
// call. Slots can be reset individually.
struct AdamState {
  LearningRateSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::vector<std::size_t> slot_steps;
  std::vector<double> lr_scale;  // optional per-slot multiplier, default 1

  void reset_slot(std::size_t slot);
};

// One Adam update of every tensor, then clears their gradients. Throws
// InvalidArgument when a parameter has no gradient.
void adam_step(std::span<const diff::Tensor> params, AdamState& state);

}  // namespace neofcam
