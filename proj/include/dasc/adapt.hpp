#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dasc/feature_store.hpp"

namespace dasc {

/// Per-Mel-band mean and population standard deviation pooled over every
/// frame of a clip subset.
struct BandStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t count = 0;  // frames pooled
  std::string domain_tag;
  std::string split_tag;

  std::size_t bands() const noexcept { return mean.size(); }
};

inline constexpr double kStdFloor = 1e-8;

/// Two-pass statistics per clip, merged in manifest order (pairwise
/// count/mean/M2 combination). Throws DataError for an empty selection.
BandStats compute_band_stats(const FeatureStore& store, std::span<const std::size_t> domains,
                             Split split);
BandStats compute_band_stats(const FeatureStore& store, std::span<const std::size_t> clip_indices,
                             std::string domain_tag, std::string split_tag);

/// Per band: (x - mu_T) / max(sigma_T, 1e-8) * sigma_S + mu_S.
FeatureMatrix adapt_features(const FeatureMatrix& x, const BandStats& source, const BandStats& target);

void write_band_stats(const std::filesystem::path& path, const BandStats& stats);
BandStats read_band_stats(const std::filesystem::path& path);

struct AdaptOptions {
  std::size_t source_domain = 0;
  /// One statistics record per target device instead of pooling them.
  bool per_device = false;
  /// Estimate target statistics on test-split features instead of train.
  bool transductive = false;
};

struct AdaptResult {
  FeatureStore store;  // target-domain test clips replaced, everything else copied
  BandStats source;
  std::vector<BandStats> targets;  // one pooled record, or one per device
  std::vector<std::size_t> target_domains_of_stats;  // empty when pooled
};

/// Unsupervised feature-level adaptation of target-domain test clips toward
/// the source training statistics.
AdaptResult adapt_store(const FeatureStore& store, const AdaptOptions& options);

/// Adapts every target-domain test clip with one explicit pair of statistics.
FeatureStore adapt_store_with(const FeatureStore& store, std::size_t source_domain,
                              const BandStats& source, const BandStats& target);

}  // namespace dasc
