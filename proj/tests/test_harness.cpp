#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dasc/binary_io.hpp"
#include "dasc/errors.hpp"
#include "dasc/evaluation.hpp"
#include "dasc/experiment.hpp"
#include "dasc/training.hpp"
#include "test_support.hpp"

using namespace dasc;
using dasc::testing::TempDir;
using dasc::testing::toy_spec;

namespace {

Profile tiny_profile(std::size_t epochs = 3) {
  return Profile{KeyValues::parse(
      "embedding_size = 8\nconv_filters = 2,3,3,4,4\nconv_kernels = 3,3,3,3,3\n"
      "conv_pool = 1,1,0,0,0\ndense_hidden = 6\nbatch_size = 8\nlearning_rate = 0.003\n"
      "lr_halving_period = 50\nseed = 0\nepochs = " +
          std::to_string(epochs) + "\n",
      "tiny")};
}

const FeatureStore& toy_store() {
  static const FeatureStore store = generate_synthetic(toy_spec()).store;
  return store;
}

double source_train_loss(const Model& m, const FeatureStore& s) {
  const auto clips = s.select(0, Split::train);
  const Tensor x = features_tensor(s, clips);
  const auto p = m.predict(x, std::vector<MaskPattern>(clips.size(), MaskPattern::all_ones(m.embedding_size())));
  Tensor y({clips.size(), s.dims().scenes});
  for (std::size_t r = 0; r < clips.size(); ++r) y.at(r, s.clip(clips[r]).scene) = 1.0;
  return cross_entropy(p.scene, y);
}

std::string train_log(const TrainConfig& cfg, const ModelConfig& mc, Checkpoint* out = nullptr) {
  std::ostringstream log;
  TrainOptions opts;
  opts.log = &log;
  auto ck = train(cfg, mc, toy_store(), opts);
  if (out) *out = std::move(ck);
  return log.str();
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.initial_lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_halving_period = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.config = ConfigId::C2M;
  c.batch_size = 6;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainConfig, EmbeddingDoublesForMaskedConfigs) {
  const ModelConfig m = ModelConfig::tiny();
  for (const ConfigId id : kAllConfigs)
    EXPECT_EQ(effective_embedding(m, id), is_masked(id) ? 16u : 8u) << to_string(id);
}

TEST(TrainConfig, StepsPerEpoch) {
  TrainConfig c = tiny_profile().train_for(ConfigId::C0);
  EXPECT_EQ(steps_per_epoch(c, toy_store()), 3u);  // 24 source clips / 8
  c.config = ConfigId::C3M;
  EXPECT_EQ(steps_per_epoch(c, toy_store()), 6u);  // 24 per domain / (8 / 2 domains)
  c.steps_per_epoch = 2;
  EXPECT_EQ(steps_per_epoch(c, toy_store()), 2u);
}

TEST(Profile, ShippedFilesMatchBuiltIns) {
  const auto desk = Profile::load(DASC_SOURCE_DIR "/profiles/desk.profile");
  const auto paper = Profile::load(DASC_SOURCE_DIR "/profiles/paper.profile");
  EXPECT_EQ(desk.values.items(), Profile::desk().values.items());
  EXPECT_EQ(paper.values.items(), Profile::paper().values.items());
}

TEST(Profile, DeskValues) {
  const auto p = Profile::desk();
  const auto s = p.synthetic();
  EXPECT_EQ(s.scenes, 4u);
  EXPECT_EQ(s.domains, 3u);
  EXPECT_EQ(s.frames, 64u);
  EXPECT_EQ(s.bands, 32u);
  const auto m = p.model_for(StoreDims{64, 32, 1, 4, 3});
  EXPECT_EQ(m.embedding, 32u);
  EXPECT_EQ(effective_embedding(m, ConfigId::C3M), 64u);
  const auto t = p.train_for(ConfigId::C0);
  EXPECT_EQ(t.batch_size, 32u);
  EXPECT_EQ(t.epochs, 30u);
  EXPECT_EQ(t.weights.domain_weight, 10.0);
  EXPECT_EQ(t.weights.variance_weight, 500.0);
}

TEST(Profile, PaperValues) {
  const auto p = Profile::paper();
  const auto m = p.model_for(StoreDims{431, 64, 1, 10, 3});
  EXPECT_EQ(m.embedding, 256u);
  const auto t = p.train_for(ConfigId::C3M);
  EXPECT_EQ(t.epochs, 400u);
  EXPECT_EQ(t.batch_size, 512u);
  EXPECT_EQ(t.initial_lr, 1e-3);
  EXPECT_EQ(t.lr_halving_period, 50u);
  EXPECT_EQ(t.adam.beta1, 0.9);
  EXPECT_EQ(t.adam.beta2, 0.999);
  EXPECT_EQ(t.adam.eps, 1e-8);
  EXPECT_THROW(p.model_for(StoreDims{64, 32, 1, 4, 3}), ConfigError);
}

TEST(Training, ZeroStepsLeavesInitialParameters) {
  const auto p = tiny_profile(2);
  TrainConfig c = p.train_for(ConfigId::C3M);
  c.steps_per_epoch = 0;
  const ModelConfig mc = p.model_for(toy_store().dims());
  const Checkpoint ck = train(c, mc, toy_store());
  ParamStore init = Model(mc, 16, c.seed).params();
  init.round_to_checkpoint_precision();
  EXPECT_TRUE(ck.params.same_values(init));
  EXPECT_EQ(ck.step, 0u);
}

TEST(Training, C0LossDecreases) {
  const auto p = tiny_profile(30);
  const ModelConfig mc = p.model_for(toy_store().dims());
  const TrainConfig c = p.train_for(ConfigId::C0);
  const double before = source_train_loss(Model(mc, 8, c.seed), toy_store());
  const Checkpoint ck = train(c, mc, toy_store());
  EXPECT_LT(source_train_loss(ck.to_model(), toy_store()), before);
  EXPECT_EQ(ck.step, 30u * 3);
}

TEST(Training, SameSeedIsBitwiseIdentical) {
  const auto p = tiny_profile(2);
  const ModelConfig mc = p.model_for(toy_store().dims());
  for (const ConfigId id : kAllConfigs) {
    Checkpoint a, b;
    const auto la = train_log(p.train_for(id), mc, &a);
    const auto lb = train_log(p.train_for(id), mc, &b);
    EXPECT_EQ(la, lb) << to_string(id);
    EXPECT_EQ(encode_params(a.params), encode_params(b.params)) << to_string(id);
  }
  TrainConfig other = p.train_for(ConfigId::C1);
  other.seed = 1;
  EXPECT_NE(train_log(other, mc), train_log(p.train_for(ConfigId::C1), mc));
}

TEST(Training, LogFollowsBreakdownColumns) {
  const auto p = tiny_profile(1);
  const auto log = train_log(p.train_for(ConfigId::C3M), p.model_for(toy_store().dims()));
  std::istringstream in(log);
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "step,epoch,config,L_total,L_A,L_D,ce_up,ce_down,ce_full,var_up,var_down,lr");
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(row);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 12u) << row;
    EXPECT_EQ(f[2], "C3M");
    EXPECT_NEAR(std::stod(f[3]), std::stod(f[4]) + 10.0 * std::stod(f[5]), 1e-9);
    EXPECT_TRUE(f[8].empty());  // no full-batch term in C3M
  }
  EXPECT_EQ(rows, 6u);
}

TEST(Training, LearningRateHalvesOnSchedule) {
  auto p = tiny_profile(4);
  p.values.set("lr_halving_period", "2");
  const auto log = train_log(p.train_for(ConfigId::C0), p.model_for(toy_store().dims()));
  EXPECT_NE(log.find(",0,C0,"), std::string::npos);
  std::istringstream in(log);
  std::string row;
  std::getline(in, row);
  while (std::getline(in, row)) {
    const auto epoch = std::stoul(row.substr(row.find(',') + 1));
    const double lr = std::stod(row.substr(row.rfind(',') + 1));
    EXPECT_EQ(lr, epoch < 2 ? 0.003 : 0.0015);
  }
}

TEST(Training, NonFiniteLossReportsTheStep) {
  auto p = tiny_profile(50);
  p.values.set("learning_rate", "1e150");
  try {
    train(p.train_for(ConfigId::C0), p.model_for(toy_store().dims()), toy_store());
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
    EXPECT_EQ(e.exit_code(), kExitNumeric);
  }
}

TEST(Training, DimensionMismatchIsRejected) {
  const auto p = tiny_profile(1);
  ModelConfig mc = p.model_for(toy_store().dims());
  mc.scenes = 4;
  EXPECT_THROW(train(p.train_for(ConfigId::C0), mc, toy_store()), ConfigError);
}

TEST(Checkpoint, ReloadReproducesEvaluationBitwise) {
  TempDir dir("ckpt");
  const auto p = tiny_profile(2);
  const ModelConfig mc = p.model_for(toy_store().dims());
  TrainConfig c = p.train_for(ConfigId::C2M);
  c.checkpoint_every = 1;
  std::vector<std::size_t> intermediate;
  TrainOptions opts;
  opts.on_checkpoint = [&](const Checkpoint& ck) { intermediate.push_back(ck.epoch); };
  const Checkpoint ck = train(c, mc, toy_store(), opts);
  EXPECT_EQ(intermediate, (std::vector<std::size_t>{1}));
  save_checkpoint(ck, dir / "m.ckpt");
  EXPECT_TRUE(std::filesystem::exists(dir / "m.ckpt.meta"));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.ckpt.tail.csv"));

  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.train.config, ConfigId::C2M);
  EXPECT_EQ(back.embedding_size, 16u);
  EXPECT_EQ(back.epoch, 2u);
  EXPECT_EQ(back.step, ck.step);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.train.seed, c.seed);
  EXPECT_EQ(back.train.checkpoint_every, 1u);
  EXPECT_TRUE(back.params.same_values(ck.params));

  const auto a = evaluate(ConfigId::C2M, ck.to_model(), toy_store());
  const auto b = evaluate(ConfigId::C2M, back.to_model(), toy_store());
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].name, b.cells[i].name);
    EXPECT_EQ(a.cells[i].accuracy, b.cells[i].accuracy);
  }
}

TEST(Checkpoint, CorruptParametersAreRejected) {
  TempDir dir("ckpt_bad");
  const auto p = tiny_profile(1);
  TrainConfig c = p.train_for(ConfigId::C0);
  c.steps_per_epoch = 0;
  save_checkpoint(train(c, p.model_for(toy_store().dims()), toy_store()), dir / "m.ckpt");
  auto bytes = io::read_file(dir / "m.ckpt");
  bytes.resize(bytes.size() - 3);
  io::write_file(dir / "m.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), FormatError);
}

// ---------------------------------------------------------------- evaluation

namespace {

Predictor oracle_predictor(const FeatureStore& s, std::vector<std::size_t>& order) {
  // The test split is visited in manifest order; the oracle replays labels.
  return [&s, &order, pos = std::size_t{0}, last = std::size_t{0}](
             const Tensor& x, std::span<const MaskPattern> masks) mutable {
    const std::size_t rows = x.extent(0);
    if (masks.front().kind() != MaskKind::minus) last = pos, pos += rows;
    Predictions p;
    p.scene = Tensor({rows, s.dims().scenes});
    p.domain = Tensor({rows, s.dims().domains});
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& c = s.clip(order[last + r]);
      p.scene.at(r, c.scene) = 1.0;
      p.domain.at(r, c.domain) = 1.0;
    }
    return p;
  };
}

}  // namespace

TEST(Evaluation, ArgmaxTiesGoToLowestIndex) {
  EXPECT_EQ(argmax_row(Tensor::matrix(1, 3, {0.2, 0.4, 0.4}), 0), 1u);
  EXPECT_EQ(argmax_row(Tensor::matrix(1, 3, {0.5, 0.5, 0.0}), 0), 0u);
}

TEST(Evaluation, OraclePredictorScoresOneEverywhere) {
  const auto& s = toy_store();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.clip(i).split == Split::test) order.push_back(i);
  for (const ConfigId id : kAllConfigs) {
    const auto t = evaluate_with(id, s, Split::test, oracle_predictor(s, order), 5);
    const std::size_t expected = is_masked(id) ? 8 : (trains_domain_head(id) ? 4 : 2);
    EXPECT_EQ(t.cells.size(), expected) << to_string(id);
    for (const auto& c : t.cells) {
      EXPECT_EQ(c.accuracy, 1.0) << to_string(id) << ' ' << c.name;
      EXPECT_EQ(c.n_clips, 6u);
    }
  }
}

TEST(Evaluation, UniformPredictionsScoreTheClassZeroFrequency) {
  const auto& s = toy_store();
  const Predictor uniform = [&](const Tensor& x, std::span<const MaskPattern>) {
    return Predictions{Tensor({x.extent(0), s.dims().scenes}, 1.0 / 3.0),
                       Tensor({x.extent(0), s.dims().domains}, 0.5), {}, {}};
  };
  const auto t = evaluate_with(ConfigId::C3, s, Split::test, uniform);
  EXPECT_DOUBLE_EQ(t.at("a_A^S"), 1.0 / 3.0);  // two of six source test clips are scene 0
  EXPECT_DOUBLE_EQ(t.at("a_D^S"), 1.0);
  EXPECT_DOUBLE_EQ(t.at("a_D^T"), 0.0);

  const ModelConfig mc = tiny_profile().model_for(s.dims());
  Model model(mc, 8, 0);
  for (auto& p : model.params().entries())
    if (p.name.find("head") != std::string::npos) p.value.fill(0.0);
  const auto m = evaluate(ConfigId::C0, model, s);
  EXPECT_DOUBLE_EQ(m.at("a_A^S"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.at("a_A^T"), 1.0 / 3.0);
}

TEST(Evaluation, CellNamesPerConfiguration) {
  const auto& s = toy_store();
  const Model model(tiny_profile().model_for(s.dims()), 16, 1);
  const auto t = evaluate(ConfigId::C3M, model, s);
  std::vector<std::string> names;
  for (const auto& c : t.cells) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"a_A^S+", "a_A^S-", "a_A^T+", "a_A^T-", "a_D^S+",
                                             "a_D^S-", "a_D^T+", "a_D^T-"}));
  EXPECT_EQ(t.da_mode, "S");
  EXPECT_THROW((void)t.at("a_A^S"), ConfigError);
}

TEST(Evaluation, EmptyGroupIsAbsentNotZero) {
  // A store whose test split holds only source clips.
  const auto& full = toy_store();
  std::vector<ClipRecord> clips;
  std::vector<FeatureMatrix> feats;
  for (std::size_t i = 0; i < full.size(); ++i) {
    auto c = full.clip(i);
    if (c.domain != 0 && c.split == Split::test) continue;
    clips.push_back(c);
    feats.push_back(full.features(i));
  }
  const FeatureStore s(full.dims(), clips, feats);
  const Model model(tiny_profile().model_for(s.dims()), 8, 1);
  const auto t = evaluate(ConfigId::C1, model, s);
  EXPECT_NE(t.find("a_A^S"), nullptr);
  EXPECT_EQ(t.find("a_A^T"), nullptr);
}

TEST(Evaluation, SideEffectFreeAndPlusCellsIgnoreMinusPasses) {
  const auto& s = toy_store();
  const Model model(tiny_profile().model_for(s.dims()), 16, 2);
  const auto a = evaluate(ConfigId::C2M, model, s);
  const auto b = evaluate(ConfigId::C2M, model, s);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i].accuracy, b.cells[i].accuracy);

  const Predictor real = [&](const Tensor& x, std::span<const MaskPattern> masks) {
    std::vector<MaskPattern> full;
    for (const auto& m : masks) full.push_back(MaskPattern::make(m.kind(), 16));
    return model.predict(x, full);
  };
  const Predictor sabotaged = [&](const Tensor& x, std::span<const MaskPattern> masks) {
    auto p = real(x, masks);
    if (masks.front().kind() == MaskKind::minus) {
      p.scene.fill(0.0);
      p.domain.fill(0.0);
    }
    return p;
  };
  const auto c = evaluate_with(ConfigId::C2M, s, Split::test, real);
  const auto d = evaluate_with(ConfigId::C2M, s, Split::test, sabotaged);
  for (const char* name : {"a_A^S+", "a_A^T+", "a_D^S+", "a_D^T+"}) EXPECT_EQ(c.at(name), d.at(name));
  for (const char* name : {"a_A^S+", "a_A^S-", "a_D^T-"}) EXPECT_EQ(c.at(name), a.at(name)) << name;
}

TEST(Results, CsvRowsPerTable) {
  TempDir dir("results");
  emit_results({}, dir / "empty.csv");
  std::ifstream empty(dir / "empty.csv");
  std::string line;
  std::getline(empty, line);
  EXPECT_EQ(line, "config,da_mode,cell_name,accuracy,n_clips");
  EXPECT_FALSE(std::getline(empty, line));

  const auto& s = toy_store();
  const std::vector<AccuracyTable> tables = {
      evaluate(ConfigId::C0, Model(tiny_profile().model_for(s.dims()), 8, 1), s),
      evaluate(ConfigId::C3M, Model(tiny_profile().model_for(s.dims()), 16, 1), s)};
  emit_results(tables, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::getline(in, line);
  std::size_t c0 = 0, c3m = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("C0,none,")) ++c0;
    if (line.starts_with("C3M,S,")) ++c3m;
  }
  EXPECT_EQ(c0, 2u);
  EXPECT_EQ(c3m, 8u);
  EXPECT_TRUE(std::filesystem::exists(dir / "r.txt"));
  EXPECT_NE(render_table(tables).find("a_D^T-"), std::string::npos);
}

TEST(Experiment, AdaptationOnlyChangesTargetCells) {
  const auto p = tiny_profile(3);
  const auto plain = run_experiment(ConfigId::C0, toy_store(), p);
  ExperimentOptions opts;
  opts.adapt = true;
  opts.reuse = &plain.checkpoint;
  const auto adapted = run_experiment(ConfigId::C0, toy_store(), p, opts);
  EXPECT_EQ(adapted.table.label, "C0-adapted");
  EXPECT_EQ(adapted.table.da_mode, "U");
  EXPECT_EQ(adapted.table.at("a_A^S"), plain.table.at("a_A^S"));
  EXPECT_TRUE(adapted.checkpoint.params.same_values(plain.checkpoint.params));

  ExperimentOptions bad;
  bad.adapt = true;
  EXPECT_THROW(run_experiment(ConfigId::C1, toy_store(), p, bad), ConfigError);
  bad.adapt = false;
  bad.reuse = &plain.checkpoint;
  EXPECT_THROW(run_experiment(ConfigId::C1, toy_store(), p, bad), ConfigError);
}

TEST(Experiment, SweepWritesEveryArtifact) {
  TempDir dir("sweep");
  const auto all = sweep(toy_store(), tiny_profile(1), dir.path(), {0, 1});
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].size(), 7u);
  EXPECT_EQ(all[0].back().label, "C0-adapted");
  for (const char* seed : {"seed_0", "seed_1"}) {
    for (const ConfigId id : kAllConfigs) {
      EXPECT_TRUE(std::filesystem::exists(dir.path() / seed / (std::string(to_string(id)) + ".ckpt")));
      EXPECT_TRUE(std::filesystem::exists(dir.path() / seed / (std::string(to_string(id)) + ".log.csv")));
    }
    EXPECT_TRUE(std::filesystem::exists(dir.path() / seed / "results.csv"));
  }
}
