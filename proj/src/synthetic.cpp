#include "dasc/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dasc/errors.hpp"

namespace dasc {

void SyntheticSpec::validate() const {
  if (scenes < 2) throw ConfigError("synthetic corpus needs >= 2 scenes");
  if (domains < 2) throw ConfigError("synthetic corpus needs >= 2 domains");
  if (clips_per_cell < 2) throw ConfigError("synthetic corpus needs >= 2 clips per cell");
  if (frames == 0 || bands == 0) throw ConfigError("synthetic frames and bands must be positive");
  if (!(gain_depth >= 0.0)) throw ConfigError("gain depth must be non-negative");
  if (!(device_coupling >= 0.0 && device_coupling <= 1.0))
    throw ConfigError("device coupling must lie in [0, 1]");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth curve over `n` bins in [-1, 1]: a few low-frequency cosines.
std::vector<double> smooth_curve(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::vector<double> c(n, 0.0);
  for (int k = 1; k <= 3; ++k) {
    const double a = amp(rng) / k;
    const double p = phase(rng);
    for (std::size_t f = 0; f < n; ++f) {
      c[f] += a * std::cos(kTwoPi * k * static_cast<double>(f) / static_cast<double>(n) + p);
    }
  }
  double peak = 0.0;
  for (double v : c) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : c) v /= peak;
  return c;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  out.spec = spec;
  std::mt19937_64 rng(spec.seed);
  const double nb = static_cast<double>(spec.bands);

  // Shared spectral tilt plus a few class-specific bumps.
  std::vector<double> base(spec.bands);
  for (std::size_t f = 0; f < spec.bands; ++f) base[f] = 1.0 + 0.5 * std::exp(-static_cast<double>(f) / nb * 2.0);
  std::uniform_real_distribution<double> centre(0.0, nb);
  std::uniform_real_distribution<double> width(nb / 16.0, nb / 8.0);
  std::uniform_real_distribution<double> height(0.4, 0.9);
  out.templates.assign(spec.scenes, base);
  for (auto& tmpl : out.templates) {
    for (int bump = 0; bump < 2; ++bump) {
      const double c = centre(rng), w = width(rng), h = height(rng);
      for (std::size_t f = 0; f < spec.bands; ++f) {
        const double d = (static_cast<double>(f) - c) / w;
        tmpl[f] += h * std::exp(-0.5 * d * d);
      }
    }
  }

  std::uniform_int_distribution<int> cycles(1, 4);
  std::uniform_real_distribution<double> depth(0.2, 0.5);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  out.envelopes.assign(spec.scenes, std::vector<double>(spec.frames));
  for (auto& env : out.envelopes) {
    const int k = cycles(rng);
    const double a = depth(rng), p = phase(rng);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      env[t] = 1.0 + a * std::sin(kTwoPi * k * static_cast<double>(t) /
                                      static_cast<double>(spec.frames) + p);
    }
  }

  out.gains.assign(spec.domains, std::vector<double>(spec.bands, 1.0));
  const auto shared = smooth_curve(spec.bands, rng);
  for (std::size_t d = 1; d < spec.domains; ++d) {
    const auto own = smooth_curve(spec.bands, rng);
    std::vector<double> curve(spec.bands);
    double peak = 0.0;
    for (std::size_t f = 0; f < spec.bands; ++f) {
      curve[f] = spec.device_coupling * shared[f] + (1.0 - spec.device_coupling) * own[f];
      peak = std::max(peak, std::abs(curve[f]));
    }
    for (std::size_t f = 0; f < spec.bands; ++f)
      out.gains[d][f] = std::exp(spec.gain_depth * (peak > 0.0 ? curve[f] / peak : 0.0));
  }

  double power = 0.0;
  for (std::size_t c = 0; c < spec.scenes; ++c)
    for (std::size_t t = 0; t < spec.frames; ++t)
      for (std::size_t f = 0; f < spec.bands; ++f) {
        const double s = out.templates[c][f] * out.envelopes[c][t];
        power += s * s;
      }
  power /= static_cast<double>(spec.scenes * spec.frames * spec.bands);
  out.noise_std = std::sqrt(power) * std::pow(10.0, -spec.snr_db / 20.0);

  const std::size_t n_train = spec.clips_per_cell * 4 / 5;
  std::vector<ClipRecord> clips;
  std::vector<FeatureMatrix> features;
  for (std::size_t d = 0; d < spec.domains; ++d)
    for (std::size_t c = 0; c < spec.scenes; ++c)
      for (std::size_t k = 0; k < spec.clips_per_cell; ++k) {
        std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(c),
                          static_cast<std::uint64_t>(k)};
        std::mt19937_64 clip_rng(seq);
        std::uniform_int_distribution<std::size_t> shift_dist(0, spec.frames - 1);
        std::normal_distribution<double> noise(0.0, out.noise_std);
        const std::size_t shift = shift_dist(clip_rng);

        FeatureMatrix m{spec.frames, spec.bands, std::vector<float>(spec.frames * spec.bands)};
        for (std::size_t t = 0; t < spec.frames; ++t) {
          const double env = out.envelopes[c][(t + shift) % spec.frames];
          for (std::size_t f = 0; f < spec.bands; ++f) {
            const double clean = out.templates[c][f] * env * out.gains[d][f];
            m.values[t * spec.bands + f] = static_cast<float>(clean + noise(clip_rng));
          }
        }
        std::ostringstream id;
        id << "s" << c << "_d" << d << "_" << k;
        ClipRecord rec{id.str(), c, d, k < n_train ? Split::train : Split::test,
                       "features/" + id.str() + ".dftr"};
        clips.push_back(std::move(rec));
        features.push_back(std::move(m));
      }

  StoreDims dims{spec.frames, spec.bands, 1, spec.scenes, spec.domains};
  out.store = FeatureStore(dims, std::move(clips), std::move(features));
  return out;
}

void write_synthetic_spec(const SyntheticSpec& spec, KeyValues& kv) {
  kv.set("scenes", std::to_string(spec.scenes));
  kv.set("domains", std::to_string(spec.domains));
  kv.set("clips_per_cell", std::to_string(spec.clips_per_cell));
  kv.set("frames", std::to_string(spec.frames));
  kv.set("bands", std::to_string(spec.bands));
  kv.set("seed", std::to_string(spec.seed));
  kv.set("snr_db", format_double(spec.snr_db));
  kv.set("gain_depth", format_double(spec.gain_depth));
  kv.set("device_coupling", format_double(spec.device_coupling));
}

SyntheticSpec synthetic_spec_from(const KeyValues& kv, SyntheticSpec d) {
  SyntheticSpec s;
  s.scenes = kv.get_size("scenes", d.scenes);
  s.domains = kv.get_size("domains", d.domains);
  s.clips_per_cell = kv.get_size("clips_per_cell", d.clips_per_cell);
  s.frames = kv.get_size("frames", d.frames);
  s.bands = kv.get_size("bands", d.bands);
  s.seed = kv.get_u64("seed", d.seed);
  s.snr_db = kv.get_double("snr_db", d.snr_db);
  s.gain_depth = kv.get_double("gain_depth", d.gain_depth);
  s.device_coupling = kv.get_double("device_coupling", d.device_coupling);
  return s;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir,
                     bool overwrite) {
  corpus.store.save(dir, overwrite);
  KeyValues meta;
  write_synthetic_spec(corpus.spec, meta);
  meta.set("noise_std", format_double(corpus.noise_std));
  meta.save(dir / "generation.meta");

  std::ofstream out(dir / "gains.csv", std::ios::trunc);
  if (!out) throw DataError("cannot write gains.csv");
  out << "domain";
  for (std::size_t f = 0; f < corpus.spec.bands; ++f) out << ",band" << f;
  out << '\n';
  for (std::size_t d = 0; d < corpus.gains.size(); ++d) {
    out << d;
    for (double g : corpus.gains[d]) out << ',' << format_double(g);
    out << '\n';
  }
}

std::vector<std::vector<double>> read_gains(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> gains;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    gains.push_back(std::move(row));
  }
  return gains;
}

}  // namespace dasc
