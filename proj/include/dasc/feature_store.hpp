#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dasc {

/// One clip's T x F Mel-band matrix, time-major, stored at 32-bit precision.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t bands = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t f) const { return values[t * bands + f]; }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

inline constexpr std::string_view kFeatureMagic = "DFTR";
inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 14;

std::vector<char> encode_feature_matrix(const FeatureMatrix& m);
FeatureMatrix decode_feature_matrix(std::vector<char> bytes, const std::string& source);
void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix load_feature_file(const std::filesystem::path& path);

enum class Split { train, test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ClipRecord {
  std::string clip_id;
  std::size_t scene = 0;
  std::size_t domain = 0;
  Split split = Split::train;
  std::string feature_path;  // relative to the store root

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

inline constexpr std::string_view kManifestHeader = "clip_id,scene_label,domain_label,split,feature_path";

void write_manifest(const std::filesystem::path& path, std::span<const ClipRecord> clips);
std::vector<ClipRecord> read_manifest(const std::filesystem::path& path);

struct StoreDims {
  std::size_t frames = 0;
  std::size_t bands = 0;
  std::size_t channels = 1;
  std::size_t scenes = 0;
  std::size_t domains = 0;

  friend bool operator==(const StoreDims&, const StoreDims&) = default;
};

/// A manifest plus every clip's features, held in memory. On disk:
///   <root>/store.meta      frames/bands/channels/scenes/domains
///   <root>/manifest.csv
///   <root>/<feature_path>  one DFTR file per clip
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(StoreDims dims, std::vector<ClipRecord> clips, std::vector<FeatureMatrix> features);

  /// Loads and validates a store; missing or malformed files are data errors.
  static FeatureStore open(const std::filesystem::path& root);
  void save(const std::filesystem::path& root, bool overwrite) const;

  const StoreDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return clips_.size(); }
  std::span<const ClipRecord> clips() const noexcept { return clips_; }
  const ClipRecord& clip(std::size_t i) const { return clips_.at(i); }
  const FeatureMatrix& features(std::size_t i) const { return features_.at(i); }
  void replace_features(std::size_t i, FeatureMatrix m);

  /// Indices of clips from `domain` in `split`, in manifest order.
  std::vector<std::size_t> select(std::size_t domain, Split split) const;
  /// Indices of clips whose domain is in `domains`, in manifest order.
  std::vector<std::size_t> select(std::span<const std::size_t> domains, Split split) const;

 private:
  void validate() const;

  StoreDims dims_;
  std::vector<ClipRecord> clips_;
  std::vector<FeatureMatrix> features_;
};

/// Refuses to reuse a non-empty directory unless `overwrite` is set.
void prepare_output_dir(const std::filesystem::path& dir, bool overwrite);

}  // namespace dasc
