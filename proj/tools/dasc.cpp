// Command-line front end: corpus generation, training, adaptation,
// evaluation, sweeps and gradient checks.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dasc/adapt.hpp"
#include "dasc/errors.hpp"
#include "dasc/evaluation.hpp"
#include "dasc/experiment.hpp"
#include "dasc/gradient_suite.hpp"
#include "dasc/kernels.hpp"
#include "dasc/synthetic.hpp"
#include "dasc/training.hpp"

namespace fs = std::filesystem;
using namespace dasc;

namespace {

// "desk" and "paper" name the built-in profiles unless a file of that name exists.
Profile resolve_profile(const std::string& name) {
  if (name.empty() || (name == "desk" && !fs::exists(name))) return Profile::desk();
  if (name == "paper" && !fs::exists(name)) return Profile::paper();
  return Profile::load(name);
}

struct GenerateArgs {
  std::optional<std::size_t> scenes, domains, clips, frames, bands;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db, gain_depth, device_coupling;
  std::string profile;
  std::string out;
  bool overwrite = false;
};

int run_generate(const GenerateArgs& a) {
  SyntheticSpec spec = resolve_profile(a.profile).synthetic();
  if (a.scenes) spec.scenes = *a.scenes;
  if (a.domains) spec.domains = *a.domains;
  if (a.clips) spec.clips_per_cell = *a.clips;
  if (a.frames) spec.frames = *a.frames;
  if (a.bands) spec.bands = *a.bands;
  if (a.seed) spec.seed = *a.seed;
  if (a.snr_db) spec.snr_db = *a.snr_db;
  if (a.gain_depth) spec.gain_depth = *a.gain_depth;
  if (a.device_coupling) spec.device_coupling = *a.device_coupling;
  const auto corpus = generate_synthetic(spec);
  write_synthetic(corpus, a.out, a.overwrite);
  std::cout << "wrote " << corpus.store.size() << " clips to " << a.out << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string config, store, profile, out, log;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  const ConfigId id = parse_config_id(a.config);
  const Profile profile = resolve_profile(a.profile);
  const FeatureStore store = FeatureStore::open(a.store);
  TrainConfig cfg = profile.train_for(id);
  if (a.seed) cfg.seed = *a.seed;
  const ModelConfig model = profile.model_for(store.dims());

  std::ofstream log_file;
  TrainOptions opts;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::trunc);
    if (!log_file) throw DataError("cannot write training log " + a.log);
    opts.log = &log_file;
  }
  opts.on_checkpoint = [&](const Checkpoint& c) {
    save_checkpoint(c, a.out + ".epoch" + std::to_string(c.epoch));
  };
  const Checkpoint ckpt = train(cfg, model, store, opts);
  save_checkpoint(ckpt, a.out);
  std::cout << "trained " << to_string(id) << " for " << ckpt.step << " steps -> " << a.out << '\n';
  return kExitOk;
}

struct AdaptArgs {
  std::string store, in, out, stats_source, stats_target;
  std::size_t source_domain = 0;
  bool per_device = false, transductive = false, overwrite = false;
};

int run_adapt(const AdaptArgs& a) {
  const bool explicit_stats = !a.stats_source.empty() || !a.stats_target.empty();
  if (explicit_stats) {
    if (a.stats_source.empty() || a.stats_target.empty() || a.in.empty())
      throw ConfigError("--stats-source, --stats-target and --in go together");
    const FeatureStore store = FeatureStore::open(a.in);
    const auto adapted = adapt_store_with(store, a.source_domain, read_band_stats(a.stats_source),
                                          read_band_stats(a.stats_target));
    adapted.save(a.out, a.overwrite);
    std::cout << "adapted " << a.in << " -> " << a.out << '\n';
    return kExitOk;
  }
  if (a.store.empty()) throw ConfigError("adapt needs --store (or explicit statistics with --in)");
  const FeatureStore store = FeatureStore::open(a.store);
  AdaptOptions opts{a.source_domain, a.per_device, a.transductive};
  const AdaptResult r = adapt_store(store, opts);
  r.store.save(a.out, a.overwrite);
  write_band_stats(fs::path(a.out) / "stats_source.csv", r.source);
  if (r.target_domains_of_stats.empty()) {
    write_band_stats(fs::path(a.out) / "stats_target.csv", r.targets.front());
  } else {
    for (std::size_t i = 0; i < r.targets.size(); ++i)
      write_band_stats(fs::path(a.out) /
                           ("stats_target_d" + std::to_string(r.target_domains_of_stats[i]) + ".csv"),
                       r.targets[i]);
  }
  std::cout << "adapted " << a.store << " -> " << a.out << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string ckpt, store, out, label;
};

int run_evaluate(const EvaluateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const FeatureStore store = FeatureStore::open(a.store);
  AccuracyTable table = evaluate(ckpt.train.config, ckpt.to_model(), store);
  if (!a.label.empty()) {
    table.label = a.label;
    if (a.label == "C0-adapted") table.da_mode = "U";
  }
  const std::vector<AccuracyTable> tables{table};
  emit_results(tables, a.out);
  std::cout << render_table(tables);
  return kExitOk;
}

struct SweepArgs {
  std::string store, profile, out;
  std::vector<std::uint64_t> seeds;
};

int run_sweep(const SweepArgs& a) {
  const FeatureStore store = FeatureStore::open(a.store);
  const Profile profile = resolve_profile(a.profile);
  std::vector<std::uint64_t> seeds = a.seeds;
  if (seeds.empty()) seeds.push_back(profile.train_for(ConfigId::C0).seed);
  const auto all = sweep(store, profile, a.out, seeds, &std::cerr);
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::cout << "seed " << seeds[i] << '\n' << render_table(all[i]);
  }
  return kExitOk;
}

int run_gradcheck(bool full_model) {
  bool ok = true;
  for (const auto& c : gradient_suite(full_model)) {
    std::cout << std::left << std::setw(24) << c.name << " max rel err " << std::scientific
              << std::setprecision(3) << c.report.max_relative_error << " over "
              << c.report.components << " components (tol " << c.tolerance << ") "
              << (c.passed() ? "ok" : "FAILED") << '\n';
    if (!c.passed()) {
      std::cout << "  worst component " << c.report.worst_component << " analytic "
                << c.report.worst_analytic << " numeric " << c.report.worst_numeric << '\n';
      ok = false;
    }
  }
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled domain adaptation for acoustic scene classification"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic multi-device feature store");
  g->add_option("--scenes", gen.scenes);
  g->add_option("--domains", gen.domains);
  g->add_option("--clips", gen.clips, "Clips per (scene, domain) cell");
  g->add_option("--frames", gen.frames);
  g->add_option("--bands", gen.bands);
  g->add_option("--seed", gen.seed);
  g->add_option("--snr-db", gen.snr_db);
  g->add_option("--gain-depth", gen.gain_depth);
  g->add_option("--device-coupling", gen.device_coupling,
                "Share of the coloration common to all non-source devices");
  g->add_option("--profile", gen.profile, "Profile whose synthetic.* keys give the defaults");
  g->add_option("--out", gen.out)->required();
  g->add_flag("--overwrite", gen.overwrite);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one loss configuration");
  t->add_option("--config", tr.config)->required();
  t->add_option("--store", tr.store)->required();
  t->add_option("--profile", tr.profile, "Profile file, or the built-in 'desk' / 'paper'");
  t->add_option("--seed", tr.seed);
  t->add_option("--out", tr.out)->required();
  t->add_option("--log", tr.log, "Per-step loss log (CSV)");

  AdaptArgs ad;
  auto* a = app.add_subcommand("adapt", "Band-wise statistical adaptation of target test clips");
  a->add_option("--store", ad.store);
  a->add_option("--source-domain", ad.source_domain);
  a->add_option("--out", ad.out)->required();
  a->add_flag("--per-device", ad.per_device);
  a->add_flag("--transductive", ad.transductive);
  a->add_option("--stats-source", ad.stats_source);
  a->add_option("--stats-target", ad.stats_target);
  a->add_option("--in", ad.in);
  a->add_flag("--overwrite", ad.overwrite);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Accuracy table of a checkpoint on the test split");
  e->add_option("--ckpt", ev.ckpt)->required();
  e->add_option("--store", ev.store)->required();
  e->add_option("--out", ev.out)->required();
  e->add_option("--label", ev.label, "Row label, e.g. C0-adapted for an adapted store");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "All six configurations plus C0-adapted");
  s->add_option("--store", sw.store)->required();
  s->add_option("--profile", sw.profile);
  s->add_option("--out", sw.out)->required();
  s->add_option("--seeds", sw.seeds)->delimiter(',');

  bool full_model = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_flag("--full-model", full_model);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    kernels::configure_threads_from_env();
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*a) return run_adapt(ad);
    if (*e) return run_evaluate(ev);
    if (*s) return run_sweep(sw);
    if (*gc) return run_gradcheck(full_model);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return err.exit_code();
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
