#include "neofcam/adam.hpp"

#include <cmath>
#include <string>

namespace neofcam {

double LearningRateSchedule::at(std::size_t step) const {
  if (interval == 0) return initial;
  return initial * std::pow(decay, static_cast<double>(step / interval));
}

void AdamState::reset_slot(std::size_t slot) {
  if (slot < m.size()) {
    std::fill(m[slot].begin(), m[slot].end(), 0.0);
    std::fill(v[slot].begin(), v[slot].end(), 0.0);
    slot_steps[slot] = 0;
  }
}

void adam_step(std::span<const diff::Tensor> params, AdamState& s) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->has_grad())
      throw InvalidArgument("adam_step: parameter " + std::to_string(i) + " has no gradient");
  if (s.m.size() < params.size()) {
    s.m.resize(params.size());
    s.v.resize(params.size());
    s.slot_steps.resize(params.size(), 0);
  }
  if (s.lr_scale.size() < params.size()) s.lr_scale.resize(params.size(), 1.0);

  const double lr = s.schedule.at(s.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    diff::TensorData& p = *params[i];
    auto& m = s.m[i];
    auto& v = s.v[i];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
      s.slot_steps[i] = 0;
    }
    const std::size_t t = ++s.slot_steps[i];
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
    const double a = lr * s.lr_scale[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g;
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g * g;
      p.value[k] -= a * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.epsilon);
    }
    p.zero_grad();
  }
  ++s.step;
}

}  // namespace neofcam
