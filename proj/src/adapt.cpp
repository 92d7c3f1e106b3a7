#include "dasc/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dasc/errors.hpp"
#include "dasc/key_values.hpp"

namespace dasc {

namespace {

struct Moments {
  double count = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;
};

Moments clip_moments(const FeatureMatrix& m) {
  Moments out;
  out.count = static_cast<double>(m.frames);
  out.mean.assign(m.bands, 0.0);
  out.m2.assign(m.bands, 0.0);
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t f = 0; f < m.bands; ++f) out.mean[f] += m.at(t, f);
  for (auto& v : out.mean) v /= out.count;
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t f = 0; f < m.bands; ++f) {
      const double d = m.at(t, f) - out.mean[f];
      out.m2[f] += d * d;
    }
  return out;
}

void merge_into(Moments& acc, const Moments& add) {
  if (acc.count == 0.0) {
    acc = add;
    return;
  }
  const double n = acc.count + add.count;
  for (std::size_t f = 0; f < acc.mean.size(); ++f) {
    const double delta = add.mean[f] - acc.mean[f];
    acc.mean[f] += delta * add.count / n;
    acc.m2[f] += add.m2[f] + delta * delta * acc.count * add.count / n;
  }
  acc.count = n;
}

std::string join_domains(std::span<const std::size_t> domains) {
  std::string s;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (i) s += '+';
    s += std::to_string(domains[i]);
  }
  return s;
}

}  // namespace

BandStats compute_band_stats(const FeatureStore& store, std::span<const std::size_t> clip_indices,
                             std::string domain_tag, std::string split_tag) {
  if (clip_indices.empty()) {
    throw DataError("band statistics: empty selection (domain " + domain_tag + ", split " +
                    split_tag + ")");
  }
  std::vector<Moments> per_clip(clip_indices.size());
  const auto n = static_cast<std::ptrdiff_t>(clip_indices.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    per_clip[static_cast<std::size_t>(i)] =
        clip_moments(store.features(clip_indices[static_cast<std::size_t>(i)]));
  }
  Moments total;
  for (const auto& m : per_clip) merge_into(total, m);

  BandStats s;
  s.mean = total.mean;
  s.std.resize(total.m2.size());
  for (std::size_t f = 0; f < s.std.size(); ++f) s.std[f] = std::sqrt(std::max(0.0, total.m2[f] / total.count));
  s.count = static_cast<std::size_t>(total.count);
  s.domain_tag = std::move(domain_tag);
  s.split_tag = std::move(split_tag);
  return s;
}

BandStats compute_band_stats(const FeatureStore& store, std::span<const std::size_t> domains,
                             Split split) {
  const auto clips = store.select(domains, split);
  return compute_band_stats(store, clips, join_domains(domains), std::string(to_string(split)));
}

FeatureMatrix adapt_features(const FeatureMatrix& x, const BandStats& source, const BandStats& target) {
  if (source.bands() != x.bands || target.bands() != x.bands || source.std.size() != x.bands ||
      target.std.size() != x.bands) {
    throw ConfigError("adapt_features: band count mismatch (features " + std::to_string(x.bands) +
                      ", source stats " + std::to_string(source.bands()) + ", target stats " +
                      std::to_string(target.bands()) + ")");
  }
  FeatureMatrix out = x;
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t f = 0; f < x.bands; ++f) {
      const double v = (x.at(t, f) - target.mean[f]) / std::max(target.std[f], kStdFloor) *
                           source.std[f] +
                       source.mean[f];
      out.values[t * x.bands + f] = static_cast<float>(v);
    }
  return out;
}

void write_band_stats(const std::filesystem::path& path, const BandStats& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# domain_tag=" << s.domain_tag << ",split_tag=" << s.split_tag << ",count=" << s.count
      << '\n';
  out << "band_index,mean,std\n";
  for (std::size_t f = 0; f < s.bands(); ++f) {
    out << f << ',' << format_double(s.mean[f]) << ',' << format_double(s.std[f]) << '\n';
  }
}

BandStats read_band_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  BandStats s;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw DataError(path.string() + ": missing statistics comment header");
  }
  {
    std::stringstream ss(line.substr(2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) continue;
      const auto key = item.substr(0, eq);
      const auto value = item.substr(eq + 1);
      if (key == "domain_tag") s.domain_tag = value;
      else if (key == "split_tag") s.split_tag = value;
      else if (key == "count") s.count = std::stoull(value);
    }
  }
  if (!std::getline(in, line) || line != "band_index,mean,std") {
    throw DataError(path.string() + ": expected header band_index,mean,std");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx, mean, sd;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, mean, ',') || !std::getline(ss, sd, ',')) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    if (std::stoull(idx) != s.mean.size()) throw DataError(path.string() + ": band indices out of order");
    s.mean.push_back(std::stod(mean));
    s.std.push_back(std::stod(sd));
  }
  if (s.mean.empty() || s.count == 0) throw DataError(path.string() + ": empty statistics");
  return s;
}

FeatureStore adapt_store_with(const FeatureStore& store, std::size_t source_domain,
                              const BandStats& source, const BandStats& target) {
  FeatureStore out = store;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& c = store.clip(i);
    if (c.domain == source_domain || c.split != Split::test) continue;
    out.replace_features(i, adapt_features(store.features(i), source, target));
  }
  return out;
}

AdaptResult adapt_store(const FeatureStore& store, const AdaptOptions& options) {
  const auto& dims = store.dims();
  if (options.source_domain >= dims.domains) {
    throw ConfigError("source domain " + std::to_string(options.source_domain) + " out of range");
  }
  const Split target_split = options.transductive ? Split::test : Split::train;
  const std::size_t src[] = {options.source_domain};

  AdaptResult r;
  r.source = compute_band_stats(store, src, Split::train);

  std::vector<std::size_t> target_domains;
  for (std::size_t d = 0; d < dims.domains; ++d)
    if (d != options.source_domain) target_domains.push_back(d);

  r.store = store;
  if (!options.per_device) {
    r.targets.push_back(compute_band_stats(store, target_domains, target_split));
    r.store = adapt_store_with(store, options.source_domain, r.source, r.targets.front());
    return r;
  }
  for (auto d : target_domains) {
    const std::size_t one[] = {d};
    r.targets.push_back(compute_band_stats(store, one, target_split));
    r.target_domains_of_stats.push_back(d);
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& c = store.clip(i);
    if (c.domain == options.source_domain || c.split != Split::test) continue;
    const auto k = static_cast<std::size_t>(
        std::find(target_domains.begin(), target_domains.end(), c.domain) - target_domains.begin());
    r.store.replace_features(i, adapt_features(store.features(i), r.source, r.targets[k]));
  }
  return r;
}

}  // namespace dasc
