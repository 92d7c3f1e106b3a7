#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasc/config_id.hpp"
#include "dasc/feature_store.hpp"
#include "dasc/model.hpp"

namespace dasc {

struct AccuracyCell {
  std::string name;  // e.g. a_A^S, a_D^T-
  double accuracy = 0.0;
  std::size_t n_clips = 0;
};

struct AccuracyTable {
  std::string label;    // config name, or C0-adapted
  std::string da_mode;  // none, U, U*, S
  std::vector<AccuracyCell> cells;

  const AccuracyCell* find(std::string_view name) const;
  /// Accuracy of a present cell; throws ConfigError when absent.
  double at(std::string_view name) const;
};

/// Maps a batch of features (rows x T x F x C) and one mask per row to
/// scene and domain distributions.
using Predictor = std::function<Predictions(const Tensor& x, std::span<const MaskPattern> masks)>;

/// Lowest index among equal maxima.
std::size_t argmax_row(const Tensor& probs, std::size_t row);

/// Accuracy table for `id` over the clips of `split`. Source group S is
/// domain 0, T pools all other domains. Cells with no clips are omitted.
AccuracyTable evaluate_with(ConfigId id, const FeatureStore& store, Split split,
                            const Predictor& predict, std::size_t chunk = 64);

AccuracyTable evaluate(ConfigId id, const Model& model, const FeatureStore& store,
                       Split split = Split::test);

/// CSV (config,da_mode,cell_name,accuracy,n_clips) at `path` and an aligned
/// text table next to it with a .txt extension.
void emit_results(std::span<const AccuracyTable> tables, const std::filesystem::path& path);
std::string render_table(std::span<const AccuracyTable> tables);

}  // namespace dasc
