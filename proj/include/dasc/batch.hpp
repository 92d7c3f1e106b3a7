#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "dasc/config_id.hpp"
#include "dasc/feature_store.hpp"
#include "dasc/model.hpp"
#include "dasc/tensor.hpp"

namespace dasc {

struct BatchSpec {
  std::size_t batch_size = 512;
  ConfigId config = ConfigId::C0;
  std::size_t embedding_size = 256;  // mask length
  std::size_t source_domain = 0;
  /// Share of source rows in the first / second batch half of the masked
  /// configurations. Negative means the configuration default.
  double up_source_fraction = -1.0;
  double down_source_fraction = -1.0;
  /// Spread target rows evenly over target devices instead of sampling the
  /// device uniformly per row.
  bool per_device_quotas = false;

  void validate() const;
};

struct SourceFractions {
  double up;
  double down;
};
SourceFractions default_source_fractions(ConfigId id);

/// One contiguous run of batch rows with a shared role.
struct RowBlock {
  std::size_t rows = 0;
  bool source = true;
  MaskKind mask = MaskKind::all_ones;
  bool asc_participates = true;
};

/// Row layout for a configuration: the first half precedes the second, and
/// within each half source rows precede target rows.
std::vector<RowBlock> batch_layout(const BatchSpec& spec);

struct Batch {
  Tensor x;                 // rows x T x F x C
  Tensor scene_targets;     // rows x A, one-hot
  Tensor domain_targets;    // rows x D, one-hot
  std::vector<MaskPattern> masks;
  std::vector<std::uint8_t> asc_participates;
  std::vector<std::size_t> clip_indices;  // into the store

  std::size_t rows() const noexcept { return masks.size(); }
};

/// Samples train-split clips with replacement following batch_layout().
/// Deterministic given (spec, store, rng state).
Batch compose_batch(const BatchSpec& spec, const FeatureStore& store, std::mt19937_64& rng);

/// Model input tensor for the listed clips (rows x T x F x 1).
Tensor features_tensor(const FeatureStore& store, std::span<const std::size_t> clips);

}  // namespace dasc
