#include "dasc/feature_store.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dasc/binary_io.hpp"
#include "dasc/errors.hpp"
#include "dasc/key_values.hpp"

namespace dasc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- DFTR

std::vector<char> encode_feature_matrix(const FeatureMatrix& m) {
  if (m.values.size() != m.frames * m.bands) {
    throw ConfigError("feature matrix holds " + std::to_string(m.values.size()) +
                      " values for " + std::to_string(m.frames) + "x" + std::to_string(m.bands));
  }
  for (float v : m.values)
    if (!std::isfinite(v)) throw NumericError("feature matrix contains non-finite values");
  io::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u16(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(m.frames));
  w.u32(static_cast<std::uint32_t>(m.bands));
  for (float v : m.values) w.f32(v);
  return w.buffer();
}

FeatureMatrix decode_feature_matrix(std::vector<char> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4, "magic") != kFeatureMagic) r.fail("bad feature-file magic");
  const auto version = r.u16("version");
  if (version != kFeatureVersion) r.fail("unsupported feature-file version " + std::to_string(version));
  FeatureMatrix m;
  m.frames = r.u32("frame count");
  m.bands = r.u32("band count");
  if (m.frames == 0 || m.bands == 0) r.fail("empty feature matrix");
  const std::size_t count = m.frames * m.bands;
  if (r.remaining() != count * 4) {
    r.fail("expected " + std::to_string(count * 4) + " value bytes, found " +
           std::to_string(r.remaining()));
  }
  m.values.resize(count);
  for (auto& v : m.values) v = r.f32("value");
  return m;
}

void write_feature_file(const fs::path& path, const FeatureMatrix& m) {
  io::write_file(path, encode_feature_matrix(m));
}

FeatureMatrix load_feature_file(const fs::path& path) {
  return decode_feature_matrix(io::read_file(path), path.string());
}

// ---------------------------------------------------------------- manifest

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "'");
}

void write_manifest(const fs::path& path, std::span<const ClipRecord> clips) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& c : clips) {
    out << c.clip_id << ',' << c.scene << ',' << c.domain << ',' << to_string(c.split) << ','
        << c.feature_path << '\n';
  }
}

std::vector<ClipRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw DataError(path.string() + ": manifest header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ClipRecord> clips;
  std::size_t line_no = 1;
  auto parse_label = [&](const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad label '" + s + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    clips.push_back({fields[0], parse_label(fields[1]), parse_label(fields[2]),
                     parse_split(fields[3]), fields[4]});
  }
  return clips;
}

// ---------------------------------------------------------------- store

FeatureStore::FeatureStore(StoreDims dims, std::vector<ClipRecord> clips,
                           std::vector<FeatureMatrix> features)
    : dims_(dims), clips_(std::move(clips)), features_(std::move(features)) {
  validate();
}

void FeatureStore::validate() const {
  if (dims_.frames == 0 || dims_.bands == 0) throw DataError("store dimensions must be positive");
  if (dims_.channels != 1) throw DataError("feature files carry a single channel");
  if (dims_.scenes < 2 || dims_.domains < 2) throw DataError("store needs >= 2 scenes and domains");
  if (clips_.size() != features_.size()) throw DataError("manifest and feature count differ");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    const auto& c = clips_[i];
    if (!ids.insert(c.clip_id).second) throw DataError("duplicate clip id " + c.clip_id);
    if (c.scene >= dims_.scenes || c.domain >= dims_.domains) {
      throw DataError("clip " + c.clip_id + " has labels outside the declared cardinalities");
    }
    const auto& m = features_[i];
    if (m.frames != dims_.frames || m.bands != dims_.bands) {
      throw DataError("clip " + c.clip_id + " has extents " + std::to_string(m.frames) + "x" +
                      std::to_string(m.bands) + ", store declares " +
                      std::to_string(dims_.frames) + "x" + std::to_string(dims_.bands));
    }
  }
}

FeatureStore FeatureStore::open(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("store directory not found: " + root.string());
  KeyValues meta;
  try {
    meta = KeyValues::load(root / "store.meta");
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  StoreDims dims;
  try {
    dims.frames = meta.get_size("frames", 0);
    dims.bands = meta.get_size("bands", 0);
    dims.channels = meta.get_size("channels", 1);
    dims.scenes = meta.get_size("scenes", 0);
    dims.domains = meta.get_size("domains", 0);
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  auto clips = read_manifest(root / "manifest.csv");
  std::vector<FeatureMatrix> features(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto path = root / clips[i].feature_path;
    if (!fs::exists(path)) throw DataError("missing feature file " + path.string());
    features[i] = load_feature_file(path);
  }
  return FeatureStore(dims, std::move(clips), std::move(features));
}

void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw DataError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite) throw DataError("output directory " + dir.string() + " is not empty");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

void FeatureStore::save(const fs::path& root, bool overwrite) const {
  prepare_output_dir(root, overwrite);
  KeyValues meta;
  meta.set("frames", std::to_string(dims_.frames));
  meta.set("bands", std::to_string(dims_.bands));
  meta.set("channels", std::to_string(dims_.channels));
  meta.set("scenes", std::to_string(dims_.scenes));
  meta.set("domains", std::to_string(dims_.domains));
  meta.save(root / "store.meta");
  write_manifest(root / "manifest.csv", clips_);
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    const auto path = root / clips_[i].feature_path;
    fs::create_directories(path.parent_path());
    write_feature_file(path, features_[i]);
  }
}

void FeatureStore::replace_features(std::size_t i, FeatureMatrix m) {
  if (m.frames != dims_.frames || m.bands != dims_.bands) {
    throw ConfigError("replacement features have the wrong extents");
  }
  features_.at(i) = std::move(m);
}

std::vector<std::size_t> FeatureStore::select(std::size_t domain, Split split) const {
  const std::size_t d[] = {domain};
  return select(d, split);
}

std::vector<std::size_t> FeatureStore::select(std::span<const std::size_t> domains,
                                              Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    if (clips_[i].split != split) continue;
    for (auto d : domains)
      if (clips_[i].domain == d) {
        out.push_back(i);
        break;
      }
  }
  return out;
}

}  // namespace dasc
