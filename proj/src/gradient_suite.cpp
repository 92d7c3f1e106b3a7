#include "dasc/gradient_suite.hpp"

#include <random>

#include "dasc/losses.hpp"
#include "dasc/model.hpp"

namespace dasc {

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

Tensor one_hot_rows(std::size_t rows, std::size_t classes, std::mt19937_64& rng) {
  Tensor t({rows, classes}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) t.at(r, rng() % classes) = 1.0;
  return t;
}

// Contracting with random weights keeps every input component relevant.
ScalarOfInput contracted(std::function<ag::Var(ag::Tape&, ag::Var)> op, Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](ag::Tape& t, ag::Var x) {
    return ag::weighted_sum(t, op(t, x), weights);
  };
}

GradientCase input_case(std::string name, const ScalarOfInput& op, const Tensor& point) {
  return {std::move(name), finite_diff_check(op, point, kGradStep), kPrimitiveTolerance};
}

}  // namespace

std::vector<GradientCase> gradient_suite(bool full_model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradientCase> out;

  {
    const Tensor x = random_tensor({3, 5}, rng);
    const Tensor w = random_tensor({5, 4}, rng);
    const Tensor b = random_tensor({4}, rng);
    const Tensor c = random_tensor({3, 4}, rng);
    out.push_back(input_case(
        "dense/input",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::dense(t, v, t.constant(w), t.constant(b)); }, c),
        x));
    out.push_back(input_case(
        "dense/weight",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::dense(t, t.constant(x), v, t.constant(b)); }, c),
        w));
    out.push_back(input_case(
        "dense/bias",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::dense(t, t.constant(x), t.constant(w), v); }, c),
        b));
  }
  {
    const Tensor x = random_tensor({2, 5, 4, 2}, rng);
    const Tensor k = random_tensor({3, 3, 2, 3}, rng);
    const Tensor c = random_tensor({2, 5, 4, 3}, rng);
    out.push_back(input_case(
        "conv2d/input",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::conv2d(t, v, t.constant(k)); }, c), x));
    out.push_back(input_case(
        "conv2d/kernel",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::conv2d(t, t.constant(x), v); }, c), k));
    const Tensor cs = random_tensor({2, 3, 2, 3}, rng);
    out.push_back(input_case("conv2d/strided",
                             contracted(
                                 [&](ag::Tape& t, ag::Var v) {
                                   return ag::conv2d(t, v, t.constant(k), {2, 2, kernels::Padding::same});
                                 },
                                 cs),
                             x));
    const Tensor bias = random_tensor({2}, rng);
    out.push_back(input_case(
        "bias_add",
        contracted([&](ag::Tape& t, ag::Var v) { return ag::bias_add(t, t.constant(x), v); }, x), bias));
    const Tensor cp = random_tensor({2, 2, 2, 2}, rng);
    out.push_back(input_case(
        "max_pool2d",
        contracted([](ag::Tape& t, ag::Var v) { return ag::max_pool2d(t, v, {2, 2}, {2, 2}); }, cp), x));
    const Tensor cg = random_tensor({2, 2}, rng);
    out.push_back(input_case(
        "global_avg_pool",
        contracted([](ag::Tape& t, ag::Var v) { return ag::global_avg_pool(t, v); }, cg), x));
    out.push_back(input_case("relu",
                             contracted([](ag::Tape& t, ag::Var v) { return ag::relu(t, v); }, x), x));
  }
  {
    const Tensor z = random_tensor({4, 6}, rng, -3.0, 3.0);
    const Tensor c = random_tensor({4, 6}, rng);
    out.push_back(input_case("softmax",
                             contracted([](ag::Tape& t, ag::Var v) { return ag::softmax(t, v); }, c), z));
    out.push_back(input_case(
        "layer_norm",
        contracted([](ag::Tape& t, ag::Var v) { return ag::layer_norm(t, v, 1e-5); }, c), z));
    const std::vector<MaskPattern> masks = {MaskPattern::plus(6), MaskPattern::minus(6),
                                            MaskPattern::all_ones(6), MaskPattern::plus(6)};
    const Tensor m = mask_tensor(masks, 6);
    out.push_back(input_case(
        "mask", contracted([&](ag::Tape& t, ag::Var v) { return ag::apply_mask(t, v, m); }, c), z));
  }
  {
    const Tensor logits = random_tensor({6, 5}, rng, -2.0, 2.0);
    const Tensor y = one_hot_rows(6, 5, rng);
    const std::vector<std::uint8_t> active = {1, 0, 1, 1, 0, 1};
    out.push_back(input_case(
        "cross_entropy",
        [&](ag::Tape& t, ag::Var v) { return cross_entropy(t, ag::softmax(t, v), y, active); }, logits));
    out.push_back(input_case(
        "variance_loss",
        [&](ag::Tape& t, ag::Var v) {
          return variance_loss(t, ag::softmax(t, v), active, VarianceSign::uncertainty);
        },
        logits));
    out.push_back(input_case(
        "variance_loss/literal",
        [&](ag::Tape& t, ag::Var v) {
          return variance_loss(t, ag::softmax(t, v), {}, VarianceSign::literal);
        },
        logits));
  }

  if (full_model) {
    const ModelConfig cfg = ModelConfig::tiny();
    Model model(cfg, 2 * cfg.embedding, seed);
    // He init leaves the heads' biases at zero; random values exercise them too.
    for (auto& p : model.params().entries())
      for (std::size_t i = 0; i < p.value.size(); ++i)
        if (p.name.ends_with("bias")) p.value[i] = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);

    Batch batch;
    const std::size_t rows = 4;
    batch.x = random_tensor({rows, cfg.frames, cfg.bands, cfg.channels}, rng, 0.0, 2.0);
    batch.scene_targets = one_hot_rows(rows, cfg.scenes, rng);
    batch.domain_targets = one_hot_rows(rows, cfg.domains, rng);
    const std::size_t e = 2 * cfg.embedding;
    batch.masks = {MaskPattern::plus(e), MaskPattern::plus(e), MaskPattern::minus(e),
                   MaskPattern::minus(e)};
    batch.asc_participates = {1, 1, 0, 0};
    const LossWeights weights;

    ScalarOfParams loss = [&](ag::Tape& t) {
      const auto fv = model.forward(t, t.constant(batch.x), batch.masks);
      return config_loss(t, ConfigId::C3M, fv.scene, fv.domain, batch, weights).total;
    };
    out.push_back({"model/C3M", finite_diff_check_params(loss, model.params(), kGradStep),
                   kFullModelTolerance});
  }
  return out;
}

}  // namespace dasc
