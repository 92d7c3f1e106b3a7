#include "dasc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "dasc/autograd.hpp"
#include "dasc/errors.hpp"

namespace dasc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(initial_lr > 0.0)) throw ConfigError("initial learning rate must be positive");
  if (lr_halving_period < 1) throw ConfigError("learning-rate halving period must be >= 1");
  weights.validate();
  BatchSpec spec;
  spec.batch_size = batch_size;
  spec.config = config;
  spec.validate();
}

std::size_t effective_embedding(const ModelConfig& model, ConfigId id) {
  return is_masked(id) ? 2 * model.embedding : model.embedding;
}

std::size_t steps_per_epoch(const TrainConfig& cfg, const FeatureStore& store) {
  if (cfg.steps_per_epoch) return *cfg.steps_per_epoch;
  const auto& dims = store.dims();
  std::size_t largest = 0;
  std::size_t domains_in_batch = 1;
  if (cfg.config == ConfigId::C0) {
    largest = store.select(0, Split::train).size();
  } else {
    domains_in_batch = dims.domains;
    for (std::size_t d = 0; d < dims.domains; ++d)
      largest = std::max(largest, store.select(d, Split::train).size());
  }
  const std::size_t numer = largest * domains_in_batch;
  return std::max<std::size_t>(1, (numer + cfg.batch_size - 1) / cfg.batch_size);
}

// ---------------------------------------------------------------- profiles

Profile Profile::load(const fs::path& path) { return Profile{KeyValues::load(path)}; }

Profile Profile::desk() {
  constexpr std::string_view text = R"(
synthetic.scenes = 4
synthetic.domains = 3
synthetic.clips_per_cell = 50
synthetic.frames = 64
synthetic.bands = 32
synthetic.seed = 0
synthetic.snr_db = 30
synthetic.gain_depth = 1.2
synthetic.device_coupling = 0.8
embedding_size = 32
conv_filters = 8,16,32,32,64
conv_kernels = 3,3,3,3,3
conv_pool = 1,1,1,1,0
dense_hidden = 64
epochs = 30
batch_size = 32
learning_rate = 0.001
lr_halving_period = 50
seed = 0
)";
  return Profile{KeyValues::parse(text, "<desk profile>")};
}

Profile Profile::paper() {
  constexpr std::string_view text = R"(
frames = 431
bands = 64
scenes = 10
domains = 3
embedding_size = 256
conv_filters = 32,64,128,128,256
conv_kernels = 3,3,3,3,3
conv_pool = 1,1,1,1,0
dense_hidden = 256
epochs = 400
batch_size = 512
learning_rate = 0.001
lr_halving_period = 50
seed = 0
)";
  return Profile{KeyValues::parse(text, "<paper profile>")};
}

ModelConfig Profile::model_for(const StoreDims& dims) const {
  ModelConfig defaults;
  defaults.frames = dims.frames;
  defaults.bands = dims.bands;
  defaults.channels = dims.channels;
  defaults.scenes = dims.scenes;
  defaults.domains = dims.domains;
  ModelConfig m = model_config_from(values, defaults);
  if (m.frames != dims.frames || m.bands != dims.bands || m.channels != dims.channels ||
      m.scenes != dims.scenes || m.domains != dims.domains) {
    throw ConfigError("profile model dimensions do not match the feature store");
  }
  return m;
}

TrainConfig Profile::train_for(ConfigId id) const {
  TrainConfig t;
  t.config = id;
  t.epochs = values.get_size("epochs", t.epochs);
  if (auto s = values.get("steps_per_epoch"); s && *s != "auto") {
    t.steps_per_epoch = values.get_size("steps_per_epoch", 0);
  }
  t.batch_size = values.get_size("batch_size", t.batch_size);
  t.initial_lr = values.get_double("learning_rate", t.initial_lr);
  t.lr_halving_period = values.get_size("lr_halving_period", t.lr_halving_period);
  t.adam.beta1 = values.get_double("adam_beta1", t.adam.beta1);
  t.adam.beta2 = values.get_double("adam_beta2", t.adam.beta2);
  t.adam.eps = values.get_double("adam_eps", t.adam.eps);
  t.weights.domain_weight = values.get_double("domain_weight", t.weights.domain_weight);
  t.weights.variance_weight = values.get_double("variance_weight", t.weights.variance_weight);
  if (auto s = values.get("variance_sign")) {
    if (*s == "uncertainty") t.weights.variance_sign = VarianceSign::uncertainty;
    else if (*s == "literal") t.weights.variance_sign = VarianceSign::literal;
    else throw ConfigError("variance_sign must be 'uncertainty' or 'literal'");
  }
  t.seed = values.get_u64("seed", t.seed);
  t.per_device_quotas = values.get_bool("per_device_quotas", t.per_device_quotas);
  t.checkpoint_every = values.get_size("checkpoint_every", t.checkpoint_every);
  t.validate();
  return t;
}

SyntheticSpec Profile::synthetic() const {
  KeyValues sub;
  for (const auto& [k, v] : values.items()) {
    if (k.rfind("synthetic.", 0) == 0) sub.set(k.substr(10), v);
  }
  return synthetic_spec_from(sub);
}

// ---------------------------------------------------------------- log

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

void write_log_header(std::ostream& out) {
  out << "step,epoch,config,L_total,L_A,L_D,ce_up,ce_down,ce_full,var_up,var_down,lr\n";
}

void write_log_row(std::ostream& out, const TrainLogRow& r) {
  out << r.step << ',' << r.epoch << ',' << to_string(r.config) << ',' << format_double(r.loss.total)
      << ',' << format_double(r.loss.scene) << ',' << format_double(r.loss.domain) << ','
      << opt(r.loss.ce_up) << ',' << opt(r.loss.ce_down) << ',' << opt(r.loss.ce_full) << ','
      << opt(r.loss.var_up) << ',' << opt(r.loss.var_down) << ',' << format_double(r.lr) << '\n';
}

// ---------------------------------------------------------------- checkpoints

namespace {

void write_train_config(const TrainConfig& t, KeyValues& kv) {
  kv.set("config", std::string(to_string(t.config)));
  kv.set("epochs", std::to_string(t.epochs));
  kv.set("steps_per_epoch", t.steps_per_epoch ? std::to_string(*t.steps_per_epoch) : "auto");
  kv.set("batch_size", std::to_string(t.batch_size));
  kv.set("learning_rate", format_double(t.initial_lr));
  kv.set("lr_halving_period", std::to_string(t.lr_halving_period));
  kv.set("adam_beta1", format_double(t.adam.beta1));
  kv.set("adam_beta2", format_double(t.adam.beta2));
  kv.set("adam_eps", format_double(t.adam.eps));
  kv.set("domain_weight", format_double(t.weights.domain_weight));
  kv.set("variance_weight", format_double(t.weights.variance_weight));
  kv.set("variance_sign",
         t.weights.variance_sign == VarianceSign::uncertainty ? "uncertainty" : "literal");
  kv.set("seed", std::to_string(t.seed));
  kv.set("per_device_quotas", t.per_device_quotas ? "true" : "false");
  kv.set("checkpoint_every", std::to_string(t.checkpoint_every));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_params(ckpt.params, path);
  KeyValues meta;
  write_train_config(ckpt.train, meta);
  meta.set("trained_epochs", std::to_string(ckpt.epoch));
  meta.set("trained_steps", std::to_string(ckpt.step));
  meta.set("effective_embedding", std::to_string(ckpt.embedding_size));
  KeyValues model;
  write_model_config(ckpt.model, model);
  for (const auto& [k, v] : model.items()) meta.set("model." + k, v);
  meta.set("rng_state", ckpt.rng_state);
  meta.save(fs::path(path.string() + ".meta"));

  std::ofstream tail(path.string() + ".tail.csv", std::ios::trunc);
  if (!tail) throw DataError("cannot write checkpoint log tail");
  write_log_header(tail);
  for (const auto& row : ckpt.log_tail) write_log_row(tail, row);
}

Checkpoint load_checkpoint(const fs::path& path) {
  Checkpoint c;
  c.params = load_params(path);
  const auto meta = KeyValues::load(fs::path(path.string() + ".meta"));
  KeyValues model;
  for (const auto& [k, v] : meta.items()) {
    if (k.rfind("model.", 0) == 0) model.set(k.substr(6), v);
  }
  c.model = model_config_from(model);
  c.embedding_size = meta.get_size("effective_embedding", c.model.embedding);
  c.train = Profile{meta}.train_for(parse_config_id(meta.require("config")));
  c.epoch = meta.get_size("trained_epochs", 0);
  c.step = meta.get_size("trained_steps", 0);
  c.rng_state = meta.get("rng_state").value_or("");
  // Shapes are checked against the architecture here.
  (void)c.to_model();
  return c;
}

// ---------------------------------------------------------------- training

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

Checkpoint train(const TrainConfig& cfg, const ModelConfig& model_cfg, const FeatureStore& store,
                 const TrainOptions& options) {
  cfg.validate();
  model_cfg.validate();
  const auto& dims = store.dims();
  if (model_cfg.frames != dims.frames || model_cfg.bands != dims.bands ||
      model_cfg.scenes != dims.scenes || model_cfg.domains != dims.domains) {
    throw ConfigError("model dimensions do not match the feature store");
  }

  const std::size_t embedding = effective_embedding(model_cfg, cfg.config);
  Model model(model_cfg, embedding, cfg.seed);
  std::seed_seq batch_seed{cfg.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(batch_seed);
  Adam adam(cfg.adam);

  BatchSpec spec;
  spec.batch_size = cfg.batch_size;
  spec.config = cfg.config;
  spec.embedding_size = embedding;
  spec.per_device_quotas = cfg.per_device_quotas;

  const std::size_t steps = steps_per_epoch(cfg, store);
  std::vector<TrainLogRow> tail;
  if (options.log) write_log_header(*options.log);

  auto snapshot = [&](std::size_t epoch, std::size_t step) {
    Checkpoint c;
    c.model = model_cfg;
    c.embedding_size = embedding;
    c.train = cfg;
    c.params = model.params();
    c.params.round_to_checkpoint_precision();
    c.params.zero_grad();
    c.params.reset_moments();
    c.epoch = epoch;
    c.step = step;
    c.rng_state = rng_to_string(rng);
    c.log_tail = tail;
    return c;
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.initial_lr, cfg.lr_halving_period, epoch);
    for (std::size_t s = 0; s < steps; ++s, ++step) {
      const Batch batch = compose_batch(spec, store, rng);
      model.params().zero_grad();
      ag::Tape tape;
      LossGraph loss;
      try {
        const ag::Var x = tape.constant(batch.x);
        const auto out = model.forward(tape, x, batch.masks);
        loss = config_loss(tape, cfg.config, out.scene, out.domain, batch, cfg.weights);
        tape.backward(loss.total);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (config " + std::string(to_string(cfg.config)) +
                           ", epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                           ")");
      }
      adam.step(model.params(), lr);

      TrainLogRow row{step, epoch, cfg.config, loss.breakdown, lr};
      if (options.log) write_log_row(*options.log, row);
      tail.push_back(row);
      if (tail.size() > options.log_tail) tail.erase(tail.begin());
    }
    if (options.on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs) {
      options.on_checkpoint(snapshot(epoch + 1, step));
    }
  }
  return snapshot(cfg.epochs, step);
}

}  // namespace dasc
