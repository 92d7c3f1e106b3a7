#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dasc/errors.hpp"
#include "dasc/losses.hpp"
#include "dasc/optimizer.hpp"
#include "test_support.hpp"

using namespace dasc;
using dasc::testing::one_hot;
using dasc::testing::random_tensor;

namespace {

// Plain-loop oracles, written without reference to the library code.
double ce_oracle(const Tensor& p, const Tensor& y, const std::vector<int>& rows) {
  double s = 0.0;
  for (int r : rows)
    for (std::size_t k = 0; k < p.extent(1); ++k)
      if (y.at(r, k) != 0.0) s -= y.at(r, k) * std::log(std::max(p.at(r, k), 1e-12));
  return s / static_cast<double>(rows.size());
}

double var_oracle(const Tensor& p, const std::vector<int>& rows) {
  const std::size_t n = p.extent(1);
  double s = 0.0;
  for (int r : rows) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += p.at(r, k);
    mean /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) v += (p.at(r, k) - mean) * (p.at(r, k) - mean);
    s += v / static_cast<double>(n);
  }
  return s / static_cast<double>(rows.size());
}

Tensor random_distributions(std::size_t rows, std::size_t n, std::mt19937_64& rng) {
  return ag::softmax_rows(random_tensor({rows, n}, rng, -3.0, 3.0));
}

Batch layout_only(ConfigId id, std::size_t rows, std::size_t scenes, std::size_t domains,
                  std::mt19937_64& rng) {
  Batch b;
  b.x = Tensor({rows, 1, 1, 1});
  b.scene_targets = one_hot(rows, scenes, rng);
  b.domain_targets = one_hot(rows, domains, rng);
  BatchSpec spec;
  spec.batch_size = rows;
  spec.config = id;
  spec.embedding_size = 4;
  for (const auto& block : batch_layout(spec))
    for (std::size_t i = 0; i < block.rows; ++i) {
      b.masks.push_back(MaskPattern::make(block.mask, 4));
      b.asc_participates.push_back(block.asc_participates ? 1 : 0);
      b.clip_indices.push_back(0);
    }
  return b;
}

}  // namespace

TEST(CrossEntropy, Examples) {
  const Tensor y = Tensor::matrix(1, 10, {0, 0, 0, 1, 0, 0, 0, 0, 0, 0});
  EXPECT_NEAR(cross_entropy(y, y), 0.0, 1e-9);
  EXPECT_NEAR(cross_entropy(Tensor({1, 10}, 0.1), y), std::log(10.0), 1e-9);
  const Tensor p = Tensor::matrix(2, 4, {0.5, 0.5, 0, 0, 0.25, 0.25, 0.25, 0.25});
  const Tensor t = Tensor::matrix(2, 4, {1, 0, 0, 0, 0, 0, 1, 0});
  EXPECT_NEAR(cross_entropy(p, t), 1.0397207708399179, 1e-12);
  const std::vector<std::uint8_t> none = {0, 0};
  EXPECT_THROW(cross_entropy(p, t, none), ConfigError);
}

TEST(CrossEntropy, ClampedAndBounded) {
  const Tensor p = Tensor::matrix(1, 3, {1, 0, 0});
  const Tensor y = Tensor::matrix(1, 3, {0, 1, 0});
  EXPECT_NEAR(cross_entropy(p, y), -std::log(1e-12), 1e-9);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const Tensor q = random_distributions(4, 5, rng);
    const double v = cross_entropy(q, one_hot(4, 5, rng));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, -std::log(1e-12));
  }
}

TEST(CrossEntropy, MatchesOracleWithRowMask) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    const Tensor p = random_distributions(6, 4, rng);
    const Tensor y = one_hot(6, 4, rng);
    std::vector<std::uint8_t> active(6);
    std::vector<int> rows;
    for (int r = 0; r < 6; ++r) {
      active[r] = (rng() % 2) || r == 0;
      if (active[r]) rows.push_back(r);
    }
    EXPECT_NEAR(cross_entropy(p, y, active), ce_oracle(p, y, rows), 1e-12);
  }
}

TEST(VarianceLoss, Examples) {
  const Tensor uniform({1, 10}, 0.1);
  EXPECT_NEAR(variance_loss(uniform, {}, VarianceSign::uncertainty), 0.0, 1e-12);
  EXPECT_NEAR(variance_loss(uniform, {}, VarianceSign::literal), 0.0, 1e-12);
  Tensor hot({1, 10});
  hot[4] = 1.0;
  EXPECT_NEAR(variance_loss(hot, {}, VarianceSign::literal), -0.09, 1e-12);
  EXPECT_NEAR(variance_loss(hot, {}, VarianceSign::uncertainty), 0.09, 1e-12);
  const Tensor half = Tensor::matrix(1, 4, {0.5, 0.5, 0, 0});
  EXPECT_NEAR(variance_loss(half, {}, VarianceSign::literal), -0.0625, 1e-15);
  const std::vector<std::uint8_t> none = {0};
  EXPECT_THROW(variance_loss(half, none), ConfigError);
}

TEST(VarianceLoss, MatchesOracleAndBounds) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + i % 9;
    const Tensor p = random_distributions(5, n, rng);
    const double v = variance_loss(p, {}, VarianceSign::uncertainty);
    EXPECT_NEAR(v, var_oracle(p, {0, 1, 2, 3, 4}), 1e-14);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, (n - 1.0) / (n * n) + 1e-15);
    EXPECT_EQ(variance_loss(p, {}, VarianceSign::literal), -v);
  }
}

TEST(VarianceLoss, RejectsRowsThatAreNotDistributions) {
  EXPECT_THROW(variance_loss(Tensor::matrix(1, 2, {0.7, 0.7})), ConfigError);
}

TEST(VarianceLoss, UncertaintySignDrivesHeadToUniform) {
  std::mt19937_64 rng(44);
  const Tensor z = random_tensor({8, 6}, rng);
  ParamStore store;
  store.add("w", random_tensor({6, 5}, rng, -2.0, 2.0));
  store.add("b", random_tensor({5}, rng, -2.0, 2.0));
  double initial_loss = 0.0;
  {
    ag::Tape t(false);
    initial_loss = variance_loss(t.value(ag::softmax(
        t, ag::dense(t, t.constant(z), t.parameter(std::as_const(store).get("w")),
                     t.parameter(std::as_const(store).get("b"))))));
  }
  Adam adam;
  for (int step = 0; step < 600; ++step) {
    store.zero_grad();
    ag::Tape t;
    const auto y = ag::softmax(
        t, ag::dense(t, t.constant(z), t.parameter(store.get("w")), t.parameter(store.get("b"))));
    t.backward(variance_loss(t, y));
    adam.step(store, lr_schedule(0.05, 150, static_cast<std::size_t>(step)));
  }
  ag::Tape t(false);
  const auto y = ag::softmax(
      t, ag::dense(t, t.constant(z), t.parameter(std::as_const(store).get("w")),
                   t.parameter(std::as_const(store).get("b"))));
  const double final_loss = variance_loss(t.value(y));
  EXPECT_LT(final_loss, 1e-3 * initial_loss);
  for (double v : t.value(y).values()) EXPECT_LT(std::abs(v - 0.2), 0.05);
}

TEST(ConfigLoss, WeightedTotalArithmetic) {
  // C3 with known terms: L_A = CE(scene), L_D = CE(domain).
  std::mt19937_64 rng(45);
  Batch b = layout_only(ConfigId::C3, 2, 2, 2, rng);
  b.scene_targets = Tensor::matrix(2, 2, {1, 0, 1, 0});
  b.domain_targets = Tensor::matrix(2, 2, {1, 0, 1, 0});
  const double pa = std::exp(-0.5), pd = std::exp(-0.1);
  const Tensor scene = Tensor::matrix(2, 2, {pa, 1 - pa, pa, 1 - pa});
  const Tensor domain = Tensor::matrix(2, 2, {pd, 1 - pd, pd, 1 - pd});
  const auto l = config_loss_values(ConfigId::C3, scene, domain, b, LossWeights{});
  EXPECT_NEAR(l.scene, 0.5, 1e-12);
  EXPECT_NEAR(l.domain, 0.1, 1e-12);
  EXPECT_NEAR(l.total, 1.5, 1e-12);
}

TEST(ConfigLoss, PerfectC0IsZero) {
  std::mt19937_64 rng(46);
  const Batch b = layout_only(ConfigId::C0, 4, 3, 2, rng);
  const auto l = config_loss_values(ConfigId::C0, b.scene_targets, Tensor({4, 2}, 0.5), b, {});
  EXPECT_NEAR(l.total, 0.0, 1e-9);
  EXPECT_EQ(l.domain, 0.0);
}

TEST(ConfigLoss, C3MMatchesHandComposition) {
  std::mt19937_64 rng(47);
  const LossWeights w;
  for (int trial = 0; trial < 50; ++trial) {
    const Batch b = layout_only(ConfigId::C3M, 4, 3, 2, rng);
    const Tensor scene = random_distributions(4, 3, rng);
    const Tensor domain = random_distributions(4, 2, rng);
    const double want = ce_oracle(scene, b.scene_targets, {0, 1}) + 500.0 * var_oracle(scene, {2, 3}) +
                        10.0 * (ce_oracle(domain, b.domain_targets, {2, 3}) +
                                500.0 * var_oracle(domain, {0, 1}));
    const auto l = config_loss_values(ConfigId::C3M, scene, domain, b, w);
    EXPECT_NEAR(l.total, want, 1e-9);
    ASSERT_TRUE(l.ce_up && l.ce_down && l.var_up && l.var_down);
  }
}

TEST(ConfigLoss, C2MSceneTermSkipsUnlabelledRows) {
  std::mt19937_64 rng(48);
  const Batch b = layout_only(ConfigId::C2M, 8, 3, 3, rng);
  const Tensor scene = random_distributions(8, 3, rng);
  const Tensor domain = random_distributions(8, 3, rng);
  std::vector<int> labelled;
  for (int r = 0; r < 8; ++r)
    if (b.asc_participates[r]) labelled.push_back(r);
  EXPECT_EQ(labelled, (std::vector<int>{0, 1, 2, 3}));
  const auto l = config_loss_values(ConfigId::C2M, scene, domain, b, {});
  EXPECT_NEAR(*l.ce_up, ce_oracle(scene, b.scene_targets, labelled), 1e-12);
}

TEST(ConfigLoss, C2SceneTermUsesSourceHalfOnly) {
  std::mt19937_64 rng(49);
  const Batch b = layout_only(ConfigId::C2, 8, 3, 3, rng);
  const Tensor scene = random_distributions(8, 3, rng);
  const Tensor domain = random_distributions(8, 3, rng);
  const auto l = config_loss_values(ConfigId::C2, scene, domain, b, {});
  EXPECT_NEAR(l.scene, ce_oracle(scene, b.scene_targets, {0, 1, 2, 3}), 1e-12);
  EXPECT_NEAR(l.domain, ce_oracle(domain, b.domain_targets, {0, 1, 2, 3, 4, 5, 6, 7}), 1e-12);
}

TEST(ConfigLoss, TotalIsSceneplusWeightedDomainEverywhere) {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 1000; ++trial) {
    const ConfigId id = kAllConfigs[trial % kAllConfigs.size()];
    const Batch b = layout_only(id, 8, 4, 3, rng);
    const auto l = config_loss_values(id, random_distributions(8, 4, rng),
                                      random_distributions(8, 3, rng), b, {});
    EXPECT_NEAR(l.total, l.scene + 10.0 * l.domain, 1e-9);
  }
}

TEST(ConfigLoss, TapeAndValueVariantsAgree) {
  std::mt19937_64 rng(51);
  for (const ConfigId id : kAllConfigs) {
    const Batch b = layout_only(id, 8, 4, 3, rng);
    const Tensor s = random_distributions(8, 4, rng), d = random_distributions(8, 3, rng);
    ag::Tape t;
    const auto g = config_loss(t, id, t.input(s), t.input(d), b, {});
    const auto v = config_loss_values(id, s, d, b, {});
    EXPECT_NEAR(t.scalar(g.total), v.total, 1e-12) << to_string(id);
    EXPECT_NEAR(g.breakdown.total, v.total, 1e-12);
  }
}

TEST(ConfigLoss, UnlabelledRowsGetNoSceneGradient) {
  std::mt19937_64 rng(52);
  for (const ConfigId id : {ConfigId::C2, ConfigId::C2M}) {
    const Batch b = layout_only(id, 8, 4, 3, rng);
    ag::Tape t;
    const auto scene_logits = t.input(random_tensor({8, 4}, rng));
    const auto scene = ag::softmax(t, scene_logits);
    const auto domain = t.input(random_distributions(8, 3, rng));
    LossWeights w;
    w.variance_weight = 0.0;  // isolate the cross-entropy terms
    t.backward(config_loss(t, id, scene, domain, b, w).total);
    const Tensor g = t.grad(scene_logits);
    for (std::size_t r = 0; r < 8; ++r)
      if (!b.asc_participates[r])
        for (double v : g.row(r)) EXPECT_EQ(v, 0.0);
  }
}

TEST(ConfigLoss, LayoutMismatchIsRejected) {
  std::mt19937_64 rng(53);
  const Batch b = layout_only(ConfigId::C3, 8, 4, 3, rng);
  EXPECT_THROW(config_loss_values(ConfigId::C3M, random_distributions(8, 4, rng),
                                  random_distributions(8, 3, rng), b, {}),
               ConfigError);
}

TEST(LossWeights, Validation) {
  EXPECT_THROW((LossWeights{0.0, 500.0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{10.0, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((LossWeights{10.0, 0.0}.validate()));
}
