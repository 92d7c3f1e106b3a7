#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dasc/gradcheck.hpp"

namespace dasc {

struct GradientCase {
  std::string name;
  GradCheckReport report;
  double tolerance = 0.0;

  bool passed() const { return report.passed(tolerance); }
};

inline constexpr double kGradStep = 1e-5;
inline constexpr double kPrimitiveTolerance = 1e-6;
inline constexpr double kFullModelTolerance = 1e-4;

/// Finite-difference checks of every tape primitive and both losses, and
/// with `full_model` the complete C3M loss of the tiny model w.r.t. every
/// parameter.
std::vector<GradientCase> gradient_suite(bool full_model, std::uint64_t seed = 7);

}  // namespace dasc
