#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dasc/errors.hpp"
#include "dasc/model.hpp"
#include "test_support.hpp"

using namespace dasc;
using dasc::testing::random_tensor;

namespace {

std::vector<MaskPattern> repeat(const MaskPattern& m, std::size_t rows) {
  return std::vector<MaskPattern>(rows, m);
}

void row_moments(std::span<const double> row, double& mean, double& var) {
  mean = 0.0;
  for (double v : row) mean += v;
  mean /= static_cast<double>(row.size());
  var = 0.0;
  for (double v : row) var += (v - mean) * (v - mean);
  var /= static_cast<double>(row.size());
}

}  // namespace

TEST(ModelConfig, PaperDefaultsValidate) {
  const ModelConfig c;
  EXPECT_EQ(c.frames, 431u);
  EXPECT_EQ(c.bands, 64u);
  EXPECT_EQ(c.embedding, 256u);
  EXPECT_EQ(c.scenes, 10u);
  EXPECT_EQ(c.domains, 3u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_NO_THROW(ModelConfig::tiny().validate());
}

TEST(ModelConfig, Invariants) {
  ModelConfig c = ModelConfig::tiny();
  c.embedding = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::tiny();
  c.scenes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::tiny();
  c.domains = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::tiny();
  for (auto& l : c.conv) l.pool = true;  // 8x8 cannot be halved five times
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfig, KeyValueRoundTrip) {
  const ModelConfig c = ModelConfig::tiny();
  KeyValues kv;
  write_model_config(c, kv);
  const ModelConfig back = model_config_from(KeyValues::parse(kv.to_string(), "mem"));
  KeyValues kv2;
  write_model_config(back, kv2);
  EXPECT_EQ(kv.items(), kv2.items());
}

TEST(Mask, BlockStructure) {
  const auto p = MaskPattern::plus(6), m = MaskPattern::minus(6), a = MaskPattern::all_ones(6);
  EXPECT_EQ(std::vector<double>(p.bits().begin(), p.bits().end()),
            (std::vector<double>{1, 1, 1, 0, 0, 0}));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(p.bits()[i] + m.bits()[i], 1.0);
    EXPECT_EQ(a.bits()[i], 1.0);
  }
  EXPECT_EQ(p.label(), "plus");
  EXPECT_THROW(MaskPattern::plus(5), ConfigError);
}

TEST(Mask, ApplyExamplesAndIdempotence) {
  ag::Tape t(false);
  const Tensor z = Tensor::matrix(1, 4, {3, -2, 5, 7});
  const auto plus = mask_tensor(repeat(MaskPattern::plus(4), 1), 4);
  const auto once = ag::apply_mask(t, t.constant(z), plus);
  EXPECT_EQ(t.value(once), Tensor::matrix(1, 4, {3, -2, 0, 0}));
  EXPECT_EQ(t.value(ag::apply_mask(t, once, plus)), t.value(once));
  const auto ones = mask_tensor(repeat(MaskPattern::all_ones(4), 1), 4);
  EXPECT_EQ(t.value(ag::apply_mask(t, t.constant(z), ones)), z);
  EXPECT_THROW(ag::apply_mask(t, t.constant(z), mask_tensor(repeat(MaskPattern::plus(6), 1), 6)),
               ConfigError);
}

TEST(LayerNorm, Examples) {
  const Tensor a = ag::layer_norm_rows(Tensor::matrix(1, 2, {1, -1}), 1e-5);
  EXPECT_NEAR(a[0], 1.0, 1e-4);
  EXPECT_NEAR(a[1], -1.0, 1e-4);
  const Tensor b = ag::layer_norm_rows(Tensor::matrix(1, 2, {0, 2}), 1e-5);
  EXPECT_NEAR(b[0], -1.0, 1e-4);
  EXPECT_NEAR(b[1], 1.0, 1e-4);
  const Tensor c = ag::layer_norm_rows(Tensor::matrix(1, 3, {4, 4, 4}), 1e-5);
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, RandomRowsAreStandardized) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> scale(0.05, 50.0), offset(-20.0, 20.0);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor z = random_tensor({4, static_cast<std::size_t>(2 + 2 * (trial % 16))}, rng);
    const double s = scale(rng), o = offset(rng);
    for (double& v : z.values()) v = v * s + o;
    const Tensor y = ag::layer_norm_rows(z, 1e-5);
    for (std::size_t r = 0; r < 4; ++r) {
      double m0, v0;
      row_moments(z.row(r), m0, v0);
      if (v0 <= 1e-3) continue;
      double m, v;
      row_moments(y.row(r), m, v);
      EXPECT_LT(std::abs(m), 1e-5);
      EXPECT_NEAR(v, v0 / (v0 + 1e-5), 1e-9);
    }
  }
}

TEST(Model, ShapesAndDistributions) {
  const ModelConfig cfg = ModelConfig::tiny();
  const Model model(cfg, cfg.embedding, 1);
  std::mt19937_64 rng(32);
  const Tensor x = random_tensor({5, 8, 8, 1}, rng, 0.0, 2.0);
  const auto p = model.predict(x, repeat(MaskPattern::all_ones(8), 5));
  EXPECT_EQ(p.scene.shape(), (Shape{5, 3}));
  EXPECT_EQ(p.domain.shape(), (Shape{5, 2}));
  EXPECT_EQ(p.z.shape(), (Shape{5, 8}));
  for (std::size_t r = 0; r < 5; ++r) {
    double sa = 0, sd = 0;
    for (double v : p.scene.row(r)) sa += v;
    for (double v : p.domain.row(r)) sd += v;
    EXPECT_NEAR(sa, 1.0, 1e-6);
    EXPECT_NEAR(sd, 1.0, 1e-6);
    double m, v;
    row_moments(p.z.row(r), m, v);
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(model.predict(random_tensor({2, 8, 7, 1}, rng), repeat(MaskPattern::all_ones(8), 2)),
               ConfigError);
}

TEST(Model, IdenticalRowsGiveIdenticalEmbeddings) {
  const ModelConfig cfg = ModelConfig::tiny();
  const Model model(cfg, cfg.embedding, 2);
  std::mt19937_64 rng(33);
  const Tensor one = random_tensor({1, 8, 8, 1}, rng);
  Tensor two({2, 8, 8, 1});
  for (std::size_t i = 0; i < one.size(); ++i) two[i] = two[i + one.size()] = one[i];
  const Tensor z = model.embed_values(two);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z.at(0, j), z.at(1, j));
}

TEST(Model, SeededInitializationIsDeterministic) {
  const ModelConfig cfg = ModelConfig::tiny();
  EXPECT_TRUE(Model(cfg, 8, 5).params().same_values(Model(cfg, 8, 5).params()));
  EXPECT_FALSE(Model(cfg, 8, 5).params().same_values(Model(cfg, 8, 6).params()));
  const Model fresh(cfg, 8, 5);
  for (const auto& p : fresh.params().entries())
    if (p.name.ends_with("bias"))
      for (double v : p.value.values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, ZeroHeadsGiveUniformPredictions) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg, 8, 3);
  for (auto& p : model.params().entries())
    if (p.name.starts_with("scene_head") || p.name.starts_with("domain_head")) p.value.fill(0.0);
  const auto p = model.predict_from_embedding(Tensor({2, 8}));
  for (double v : p.scene.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  for (double v : p.domain.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Model, MaskedHalfDoesNotReachTheHeads) {
  const ModelConfig cfg = ModelConfig::tiny();
  const Model model(cfg, 16, 4);
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor z = random_tensor({3, 16}, rng);
    Tensor moved = z;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t j = 8; j < 16; ++j) moved.at(r, j) += 10.0 * (j - 7.5);
    ag::Tape t(false);
    const auto mask = mask_tensor(repeat(MaskPattern::plus(16), 3), 16);
    const auto a = model.predict_from_embedding(t.value(ag::apply_mask(t, t.constant(z), mask)));
    const auto b = model.predict_from_embedding(t.value(ag::apply_mask(t, t.constant(moved), mask)));
    EXPECT_EQ(a.scene, b.scene);
    EXPECT_EQ(a.domain, b.domain);
  }
}

TEST(Model, GradientIsExactlyZeroOnMaskedComponents) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg, 16, 5);
  std::mt19937_64 rng(35);
  ag::Tape t;
  const auto z = t.input(random_tensor({4, 16}, rng));
  std::vector<MaskPattern> masks = {MaskPattern::plus(16), MaskPattern::minus(16),
                                    MaskPattern::plus(16), MaskPattern::all_ones(16)};
  const auto zt = ag::apply_mask(t, z, mask_tensor(masks, 16));
  const auto w = t.parameter(model.params().get("scene_head.weight"));
  const auto b = t.parameter(model.params().get("scene_head.bias"));
  const auto y = ag::softmax(t, ag::dense(t, zt, w, b));
  t.backward(ag::weighted_sum(t, y, random_tensor({4, 3}, rng)));
  const Tensor g = t.grad(z);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 16; ++j)
      if (masks[r].bits()[j] == 0.0) EXPECT_EQ(g.at(r, j), 0.0);
      else EXPECT_NE(g.at(r, j), 0.0);
}

TEST(Model, PlusPassIgnoresDomainHead) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model a(cfg, 16, 6);
  Model b(cfg, 16, 6);
  for (auto& p : b.params().entries())
    if (p.name.starts_with("domain_head"))
      for (double& v : p.value.values()) v = v * -3.0 + 0.7;
  std::mt19937_64 rng(36);
  const Tensor x = random_tensor({3, 8, 8, 1}, rng);
  const auto masks = repeat(MaskPattern::plus(16), 3);
  EXPECT_EQ(a.predict(x, masks).scene, b.predict(x, masks).scene);
}

TEST(Model, ForwardMatchesPredict) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg, 16, 7);
  std::mt19937_64 rng(37);
  const Tensor x = random_tensor({4, 8, 8, 1}, rng);
  const std::vector<MaskPattern> masks = {MaskPattern::plus(16), MaskPattern::plus(16),
                                          MaskPattern::minus(16), MaskPattern::minus(16)};
  ag::Tape t;
  const auto f = model.forward(t, t.constant(x), masks);
  const auto p = model.predict(x, masks);
  EXPECT_EQ(t.value(f.scene), p.scene);
  EXPECT_EQ(t.value(f.domain), p.domain);
  EXPECT_EQ(t.value(f.z_tilde), p.z_tilde);
}

TEST(Model, AdoptedParametersMustMatch) {
  const ModelConfig cfg = ModelConfig::tiny();
  ParamStore wrong = Model(cfg, 8, 1).params();
  EXPECT_THROW(Model(cfg, 16, wrong), ConfigError);
  EXPECT_NO_THROW(Model(cfg, 8, Model(cfg, 8, 1).params()));
}
