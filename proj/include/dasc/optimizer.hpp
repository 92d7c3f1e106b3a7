#pragma once

#include <cstddef>

#include "dasc/param_store.hpp"

namespace dasc {

/// initial_lr * 0.5^floor(epoch / period).
double lr_schedule(double initial_lr, std::size_t halving_period, std::size_t epoch);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments kept in each Parameter. No weight decay.
class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : settings_(settings) {}

  void step(ParamStore& params, double lr);
  std::size_t steps() const noexcept { return steps_; }
  const AdamSettings& settings() const noexcept { return settings_; }

 private:
  AdamSettings settings_;
  std::size_t steps_ = 0;
};

}  // namespace dasc
