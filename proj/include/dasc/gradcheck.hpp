#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "dasc/autograd.hpp"
#include "dasc/param_store.hpp"

namespace dasc {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t components = 0;
  std::size_t worst_component = 0;
  std::string worst_name;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
  void merge(const GradCheckReport& other);
};

/// |a - n| / max(|a|, |n|, 1e-12).
double relative_error(double analytic, double numeric);

using ScalarOfInput = std::function<ag::Var(ag::Tape&, ag::Var)>;
using ScalarOfParams = std::function<ag::Var(ag::Tape&)>;

/// Compares the tape gradient of op(point) against central differences with
/// the given step, one input component at a time.
GradCheckReport finite_diff_check(const ScalarOfInput& op, const Tensor& point, double step);

/// Same, for every scalar in `store`; `loss` must bind its parameters through
/// Tape::parameter so the analytic gradient lands in the store.
GradCheckReport finite_diff_check_params(const ScalarOfParams& loss, ParamStore& store,
                                         double step);

}  // namespace dasc
