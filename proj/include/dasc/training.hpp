#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dasc/adapt.hpp"
#include "dasc/batch.hpp"
#include "dasc/config_id.hpp"
#include "dasc/feature_store.hpp"
#include "dasc/key_values.hpp"
#include "dasc/losses.hpp"
#include "dasc/model.hpp"
#include "dasc/optimizer.hpp"
#include "dasc/param_store.hpp"
#include "dasc/synthetic.hpp"

namespace dasc {

struct TrainConfig {
  ConfigId config = ConfigId::C0;
  std::size_t epochs = 400;
  /// Unset: ceil(train clips of the largest participating domain /
  /// (batch_size / domains in the batch)).
  std::optional<std::size_t> steps_per_epoch;
  std::size_t batch_size = 512;
  double initial_lr = 1e-3;
  std::size_t lr_halving_period = 50;
  AdamSettings adam;
  LossWeights weights;
  std::uint64_t seed = 0;
  bool per_device_quotas = false;
  /// Emit an intermediate checkpoint every N epochs (0: final only).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

/// Embedding width actually trained: 2E for masked configurations.
std::size_t effective_embedding(const ModelConfig& model, ConfigId id);

std::size_t steps_per_epoch(const TrainConfig& cfg, const FeatureStore& store);

/// A profile file bundles model, training and synthetic-corpus settings as
/// key = value lines. Model dimensions missing from the file are taken from
/// the store at hand.
struct Profile {
  KeyValues values;

  static Profile load(const std::filesystem::path& path);
  static Profile desk();
  static Profile paper();

  ModelConfig model_for(const StoreDims& dims) const;
  TrainConfig train_for(ConfigId id) const;
  SyntheticSpec synthetic() const;
};

struct TrainLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  ConfigId config = ConfigId::C0;
  LossBreakdown loss;
  double lr = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const TrainLogRow& row);

struct Checkpoint {
  ModelConfig model;
  std::size_t embedding_size = 0;
  TrainConfig train;
  ParamStore params;
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::string rng_state;
  std::vector<TrainLogRow> log_tail;

  Model to_model() const { return Model(model, embedding_size, params); }
};

/// Writes <path> (DASC parameters), <path>.meta and <path>.tail.csv.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainOptions {
  std::ostream* log = nullptr;  // full per-step CSV log
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::size_t log_tail = 32;
};

/// Runs epochs x steps_per_epoch Adam steps of compose_batch -> forward ->
/// config_loss -> backward. Parameters in the returned checkpoint are
/// rounded to checkpoint precision.
Checkpoint train(const TrainConfig& cfg, const ModelConfig& model, const FeatureStore& store,
                 const TrainOptions& options = {});

}  // namespace dasc
