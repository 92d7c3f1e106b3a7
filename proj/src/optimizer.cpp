#include "dasc/optimizer.hpp"

#include <cmath>

#include "dasc/errors.hpp"

namespace dasc {

double lr_schedule(double initial_lr, std::size_t halving_period, std::size_t epoch) {
  if (halving_period == 0) throw ConfigError("learning-rate halving period must be >= 1");
  return initial_lr * std::pow(0.5, static_cast<double>(epoch / halving_period));
}

void Adam::step(ParamStore& params, double lr) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correct1 = 1.0 - std::pow(settings_.beta1, t);
  const double correct2 = 1.0 - std::pow(settings_.beta2, t);
  for (auto& p : params.entries()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      double& m = p.first_moment[i];
      double& v = p.second_moment[i];
      m = settings_.beta1 * m + (1.0 - settings_.beta1) * g;
      v = settings_.beta2 * v + (1.0 - settings_.beta2) * g * g;
      const double m_hat = m / correct1;
      const double v_hat = v / correct2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + settings_.eps);
    }
  }
}

}  // namespace dasc
