#include "dasc/losses.hpp"

#include <cmath>
#include <string>

#include "dasc/errors.hpp"

namespace dasc {

void LossWeights::validate() const {
  if (!(domain_weight > 0.0)) throw ConfigError("domain loss weight must be positive");
  if (!(variance_weight >= 0.0)) throw ConfigError("variance loss weight must be non-negative");
}

namespace {

struct RowSelection {
  std::size_t rows = 0;
  std::size_t classes = 0;
  std::size_t active = 0;
  std::vector<std::uint8_t> flags;
};

RowSelection select_rows(const Tensor& y_hat, std::span<const std::uint8_t> active,
                         const char* op) {
  if (y_hat.rank() != 2) {
    throw ConfigError(std::string(op) + ": predictions must be rows x classes, got " +
                      shape_to_string(y_hat.shape()));
  }
  RowSelection s;
  s.rows = y_hat.extent(0);
  s.classes = y_hat.extent(1);
  if (active.empty()) {
    s.flags.assign(s.rows, 1);
  } else {
    if (active.size() != s.rows) {
      throw ConfigError(std::string(op) + ": row mask has " + std::to_string(active.size()) +
                        " entries for " + std::to_string(s.rows) + " rows");
    }
    s.flags.assign(active.begin(), active.end());
  }
  for (auto f : s.flags) s.active += f ? 1 : 0;
  if (s.active == 0) throw ConfigError(std::string(op) + ": no active rows");
  return s;
}

void check_targets(const Tensor& y_hat, const Tensor& y) {
  if (y.shape() != y_hat.shape()) {
    throw ConfigError("cross_entropy: targets " + shape_to_string(y.shape()) +
                      " do not match predictions " + shape_to_string(y_hat.shape()));
  }
}

// Rows are expected to be distributions; the mean class probability is then
// exactly 1/N and is not recomputed.
void check_distributions(const Tensor& y_hat, const RowSelection& s) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (!s.flags[r]) continue;
    double total = 0.0;
    for (std::size_t n = 0; n < s.classes; ++n) total += y_hat.at(r, n);
    if (std::abs(total - 1.0) > 1e-3) {
      throw ConfigError("variance_loss: row " + std::to_string(r) + " sums to " +
                        std::to_string(total) + ", expected a distribution");
    }
  }
}

double sign_factor(VarianceSign sign) { return sign == VarianceSign::uncertainty ? 1.0 : -1.0; }

}  // namespace

double cross_entropy(const Tensor& y_hat, const Tensor& y, std::span<const std::uint8_t> active) {
  const auto s = select_rows(y_hat, active, "cross_entropy");
  check_targets(y_hat, y);
  double total = 0.0;
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (!s.flags[r]) continue;
    for (std::size_t n = 0; n < s.classes; ++n) {
      const double target = y.at(r, n);
      if (target != 0.0) total -= target * std::log(std::max(y_hat.at(r, n), kLogClamp));
    }
  }
  return total / static_cast<double>(s.active);
}

double variance_loss(const Tensor& y_hat, std::span<const std::uint8_t> active, VarianceSign sign) {
  const auto s = select_rows(y_hat, active, "variance_loss");
  check_distributions(y_hat, s);
  const double mean = 1.0 / static_cast<double>(s.classes);
  double total = 0.0;
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (!s.flags[r]) continue;
    double v = 0.0;
    for (std::size_t n = 0; n < s.classes; ++n) {
      const double d = y_hat.at(r, n) - mean;
      v += d * d;
    }
    total += v / static_cast<double>(s.classes);
  }
  return sign_factor(sign) * total / static_cast<double>(s.active);
}

ag::Var cross_entropy(ag::Tape& t, ag::Var y_hat, const Tensor& y, std::vector<std::uint8_t> active) {
  const auto& p = t.value(y_hat);
  auto s = select_rows(p, active, "cross_entropy");
  const double value = cross_entropy(p, y, s.flags);
  return t.record("cross_entropy", Tensor({1}, value), {y_hat},
                  [y_hat, y, s = std::move(s)](ag::Tape& tape, const Tensor&, const Tensor& dy) {
                    const auto& pv = tape.value(y_hat);
                    auto& g = tape.grad_slot(y_hat);
                    const double scale = dy[0] / static_cast<double>(s.active);
                    for (std::size_t r = 0; r < s.rows; ++r) {
                      if (!s.flags[r]) continue;
                      for (std::size_t n = 0; n < s.classes; ++n) {
                        const double target = y.at(r, n);
                        const double prob = pv.at(r, n);
                        if (target != 0.0 && prob > kLogClamp) {
                          g.at(r, n) -= scale * target / prob;
                        }
                      }
                    }
                  });
}

ag::Var variance_loss(ag::Tape& t, ag::Var y_hat, std::vector<std::uint8_t> active,
                      VarianceSign sign) {
  const auto& p = t.value(y_hat);
  auto s = select_rows(p, active, "variance_loss");
  const double value = variance_loss(p, s.flags, sign);
  return t.record("variance_loss", Tensor({1}, value), {y_hat},
                  [y_hat, sign, s = std::move(s)](ag::Tape& tape, const Tensor&, const Tensor& dy) {
                    const auto& pv = tape.value(y_hat);
                    auto& g = tape.grad_slot(y_hat);
                    const double n_cls = static_cast<double>(s.classes);
                    const double mean = 1.0 / n_cls;
                    const double scale =
                        dy[0] * sign_factor(sign) * 2.0 / (n_cls * static_cast<double>(s.active));
                    for (std::size_t r = 0; r < s.rows; ++r) {
                      if (!s.flags[r]) continue;
                      for (std::size_t n = 0; n < s.classes; ++n) {
                        g.at(r, n) += scale * (pv.at(r, n) - mean);
                      }
                    }
                  });
}

void check_batch_layout(ConfigId id, const Batch& batch) {
  const std::size_t rows = batch.rows();
  if (rows == 0) throw ConfigError("empty batch");
  if (batch.asc_participates.size() != rows || batch.scene_targets.extent(0) != rows ||
      batch.domain_targets.extent(0) != rows) {
    throw ConfigError("batch fields disagree on the row count");
  }
  const bool masked = is_masked(id);
  if (id != ConfigId::C0 && rows % 2 != 0) {
    throw ConfigError(std::string(to_string(id)) + " needs an even number of batch rows");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    MaskKind want = MaskKind::all_ones;
    if (masked) want = r < rows / 2 ? MaskKind::plus : MaskKind::minus;
    if (batch.masks[r].kind() != want) {
      throw ConfigError("batch row " + std::to_string(r) + " carries a " +
                        std::string(batch.masks[r].label()) + " mask, " +
                        std::string(to_string(id)) + " expects " + std::string(to_string(want)));
    }
  }
}

LossGraph config_loss(ag::Tape& t, ConfigId id, ag::Var scene, ag::Var domain, const Batch& batch,
                      const LossWeights& weights) {
  weights.validate();
  check_batch_layout(id, batch);
  const std::size_t rows = batch.rows();
  const std::size_t half = rows / 2;

  std::vector<std::uint8_t> up(rows, 0), down(rows, 0), labelled(rows, 0), labelled_up(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    (r < half ? up : down)[r] = 1;
    labelled[r] = batch.asc_participates[r] ? 1 : 0;
    labelled_up[r] = (r < half && labelled[r]) ? 1 : 0;
  }

  LossGraph out;
  auto& b = out.breakdown;
  ag::Var scene_loss, domain_loss;
  bool has_domain = false;

  switch (id) {
    case ConfigId::C0:
    case ConfigId::C1:
    case ConfigId::C3: {
      scene_loss = cross_entropy(t, scene, batch.scene_targets, labelled);
      b.ce_full = t.scalar(scene_loss);
      if (id == ConfigId::C3) {
        domain_loss = cross_entropy(t, domain, batch.domain_targets);
        has_domain = true;
      }
      break;
    }
    case ConfigId::C2: {
      scene_loss = cross_entropy(t, scene, batch.scene_targets, labelled_up);
      b.ce_up = t.scalar(scene_loss);
      domain_loss = cross_entropy(t, domain, batch.domain_targets);
      b.ce_full = t.scalar(domain_loss);
      has_domain = true;
      break;
    }
    case ConfigId::C2M:
    case ConfigId::C3M: {
      const ag::Var ce_up = cross_entropy(t, scene, batch.scene_targets, labelled_up);
      const ag::Var var_down = variance_loss(t, scene, down, weights.variance_sign);
      const ag::Var ce_down = cross_entropy(t, domain, batch.domain_targets, down);
      const ag::Var var_up = variance_loss(t, domain, up, weights.variance_sign);
      b.ce_up = t.scalar(ce_up);
      b.var_down = t.scalar(var_down);
      b.ce_down = t.scalar(ce_down);
      b.var_up = t.scalar(var_up);
      scene_loss = ag::add(t, ce_up, ag::scale(t, var_down, weights.variance_weight));
      domain_loss = ag::add(t, ce_down, ag::scale(t, var_up, weights.variance_weight));
      has_domain = true;
      break;
    }
  }

  b.scene = t.scalar(scene_loss);
  if (has_domain) {
    b.domain = t.scalar(domain_loss);
    out.total = ag::add(t, scene_loss, ag::scale(t, domain_loss, weights.domain_weight));
  } else {
    b.domain = 0.0;
    out.total = ag::add(t, scene_loss, ag::scale(t, t.constant(Tensor({1}, 0.0)), weights.domain_weight));
  }
  b.total = t.scalar(out.total);
  return out;
}

LossBreakdown config_loss_values(ConfigId id, const Tensor& scene, const Tensor& domain,
                                 const Batch& batch, const LossWeights& weights) {
  ag::Tape t(false);
  return config_loss(t, id, t.constant(scene), t.constant(domain), batch, weights).breakdown;
}

}  // namespace dasc
