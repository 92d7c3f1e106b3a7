#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dasc/autograd.hpp"
#include "dasc/batch.hpp"
#include "dasc/config_id.hpp"
#include "dasc/model.hpp"
#include "dasc/tensor.hpp"

namespace dasc {

inline constexpr double kLogClamp = 1e-12;

/// `uncertainty` returns +mean row variance, so minimizing it flattens the
/// prediction. `literal` returns the negated mean variance.
enum class VarianceSign { uncertainty, literal };

struct LossWeights {
  double domain_weight = 10.0;
  double variance_weight = 500.0;
  VarianceSign variance_sign = VarianceSign::uncertainty;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double scene = 0.0;   // L_A
  double domain = 0.0;  // L_D
  std::optional<double> ce_up;
  std::optional<double> ce_down;
  std::optional<double> ce_full;
  std::optional<double> var_up;
  std::optional<double> var_down;
};

/// -(1/B') sum over active rows of sum_n y log(max(y_hat, 1e-12)). An empty
/// `active` span means every row. Throws ConfigError if no row is active.
double cross_entropy(const Tensor& y_hat, const Tensor& y, std::span<const std::uint8_t> active = {});

/// Mean over active rows of the population variance of each prediction row
/// around 1/N, signed per `sign`.
double variance_loss(const Tensor& y_hat, std::span<const std::uint8_t> active = {},
                     VarianceSign sign = VarianceSign::uncertainty);

ag::Var cross_entropy(ag::Tape& t, ag::Var y_hat, const Tensor& y,
                      std::vector<std::uint8_t> active = {});
ag::Var variance_loss(ag::Tape& t, ag::Var y_hat, std::vector<std::uint8_t> active = {},
                      VarianceSign sign = VarianceSign::uncertainty);

struct LossGraph {
  ag::Var total;
  LossBreakdown breakdown;
};

/// Assembles L = L_A + w_D * L_D for a configuration from the model outputs
/// and the batch layout. Terms per configuration:
///   C0, C1  L_A = CE(scene, all rows)
///   C2      L_A = CE(scene, first half, labelled rows); L_D = CE(domain, all)
///   C3      L_A = CE(scene, all);                      L_D = CE(domain, all)
///   C2M/C3M L_A = CE(scene, first half, labelled) + w_v * Var(scene, second half)
///           L_D = CE(domain, second half)           + w_v * Var(domain, first half)
LossGraph config_loss(ag::Tape& t, ConfigId id, ag::Var scene, ag::Var domain, const Batch& batch,
                      const LossWeights& weights);

/// Value-only variant on precomputed predictions.
LossBreakdown config_loss_values(ConfigId id, const Tensor& scene, const Tensor& domain,
                                 const Batch& batch, const LossWeights& weights);

/// Throws ConfigError when the batch masks do not follow the layout `id`
/// expects (plus/minus halves for masked configurations, all-ones otherwise).
void check_batch_layout(ConfigId id, const Batch& batch);

}  // namespace dasc
