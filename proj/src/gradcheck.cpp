#include "dasc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dasc {

void GradCheckReport::merge(const GradCheckReport& other) {
  if (other.max_relative_error > max_relative_error) {
    max_relative_error = other.max_relative_error;
    worst_component = other.worst_component;
    worst_name = other.worst_name;
    worst_analytic = other.worst_analytic;
    worst_numeric = other.worst_numeric;
  }
  components += other.components;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void note(GradCheckReport& report, std::size_t index, const std::string& name, double a,
          double n) {
  const double err = relative_error(a, n);
  if (err > report.max_relative_error || report.components == 0) {
    report.max_relative_error = std::max(report.max_relative_error, err);
    report.worst_component = index;
    report.worst_name = name;
    report.worst_analytic = a;
    report.worst_numeric = n;
  }
  ++report.components;
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarOfInput& op, const Tensor& point, double step) {
  ag::Tape tape;
  const ag::Var x = tape.input(point);
  tape.backward(op(tape, x));
  const Tensor analytic = tape.grad(x);

  auto evaluate = [&](const Tensor& at) {
    ag::Tape probe(false);
    return probe.scalar(op(probe, probe.constant(at)));
  };

  GradCheckReport report;
  Tensor shifted = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    shifted[i] = point[i] + step;
    const double up = evaluate(shifted);
    shifted[i] = point[i] - step;
    const double down = evaluate(shifted);
    shifted[i] = point[i];
    note(report, i, "input", analytic[i], (up - down) / (2.0 * step));
  }
  return report;
}

GradCheckReport finite_diff_check_params(const ScalarOfParams& loss, ParamStore& store,
                                         double step) {
  store.zero_grad();
  {
    ag::Tape tape;
    tape.backward(loss(tape));
  }

  auto evaluate = [&] {
    ag::Tape probe(false);
    return probe.scalar(loss(probe));
  };

  GradCheckReport report;
  for (auto& p : store.entries()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double original = p.value[i];
      p.value[i] = original + step;
      const double up = evaluate();
      p.value[i] = original - step;
      const double down = evaluate();
      p.value[i] = original;
      note(report, i, p.name, p.grad[i], (up - down) / (2.0 * step));
    }
  }
  return report;
}

}  // namespace dasc
