#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dasc/feature_store.hpp"
#include "dasc/key_values.hpp"

namespace dasc {

/// Parameters of the synthetic microphone-mismatch corpus:
///   x[t, f] = template_c[f] * envelope_c[t - shift] * gain_d[f] + noise
/// Domain 0 is the source device and has unit gain.
struct SyntheticSpec {
  std::size_t scenes = 4;
  std::size_t domains = 3;
  std::size_t clips_per_cell = 50;
  std::size_t frames = 64;
  std::size_t bands = 32;
  std::uint64_t seed = 0;
  double snr_db = 30.0;
  /// Peak log-gain of the non-source band colorations (natural-log units).
  double gain_depth = 1.2;
  /// Weight of the response shared by all non-source devices, in [0, 1];
  /// the rest of each device's coloration is its own.
  double device_coupling = 0.8;

  void validate() const;
};

struct SyntheticCorpus {
  SyntheticSpec spec;
  FeatureStore store;
  std::vector<std::vector<double>> templates;  // scenes x bands
  std::vector<std::vector<double>> envelopes;  // scenes x frames
  std::vector<std::vector<double>> gains;      // domains x bands
  double noise_std = 0.0;
};

/// Pure function of the spec: identical specs give identical corpora.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Writes the store plus generation.meta (the spec) and gains.csv.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir,
                     bool overwrite);

/// Reads gains.csv written by write_synthetic (domains x bands).
std::vector<std::vector<double>> read_gains(const std::filesystem::path& path);

void write_synthetic_spec(const SyntheticSpec& spec, KeyValues& kv);
SyntheticSpec synthetic_spec_from(const KeyValues& kv, SyntheticSpec defaults = {});

}  // namespace dasc
