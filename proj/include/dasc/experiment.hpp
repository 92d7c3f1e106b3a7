#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dasc/adapt.hpp"
#include "dasc/evaluation.hpp"
#include "dasc/training.hpp"

namespace dasc {

struct ExperimentOptions {
  /// C0 only: adapt target test clips band-wise before evaluating.
  bool adapt = false;
  AdaptOptions adapt_options;
  /// Evaluate this checkpoint instead of training a new one.
  const Checkpoint* reuse = nullptr;
  std::optional<std::uint64_t> seed;
  TrainOptions train_options;
};

struct ExperimentResult {
  Checkpoint checkpoint;
  AccuracyTable table;
};

ExperimentResult run_experiment(ConfigId id, const FeatureStore& store, const Profile& profile,
                                const ExperimentOptions& options = {});

/// Trains all six configurations, evaluates each on the test split and adds
/// C0-adapted from the C0 checkpoint. Per seed directory: <config>.ckpt,
/// <config>.log.csv, results.csv and results.txt. With more than one seed
/// each seed gets a seed_<n> subdirectory.
std::vector<std::vector<AccuracyTable>> sweep(const FeatureStore& store, const Profile& profile,
                                              const std::filesystem::path& out_dir,
                                              const std::vector<std::uint64_t>& seeds,
                                              std::ostream* progress = nullptr);

}  // namespace dasc
