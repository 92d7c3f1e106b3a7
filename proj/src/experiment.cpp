#include "dasc/experiment.hpp"

#include <chrono>
#include <fstream>
#include <ostream>

#include "dasc/errors.hpp"

namespace dasc {

ExperimentResult run_experiment(ConfigId id, const FeatureStore& store, const Profile& profile,
                                const ExperimentOptions& options) {
  if (options.adapt && id != ConfigId::C0)
    throw ConfigError("feature adaptation is only defined for C0");

  ExperimentResult result;
  if (options.reuse) {
    if (options.reuse->train.config != id)
      throw ConfigError("reused checkpoint was trained for " +
                        std::string(to_string(options.reuse->train.config)));
    result.checkpoint = *options.reuse;
  } else {
    TrainConfig cfg = profile.train_for(id);
    if (options.seed) cfg.seed = *options.seed;
    result.checkpoint = train(cfg, profile.model_for(store.dims()), store, options.train_options);
  }

  const Model model = result.checkpoint.to_model();
  if (options.adapt) {
    AdaptOptions ao = options.adapt_options;
    const AdaptResult adapted = adapt_store(store, ao);
    result.table = evaluate(id, model, adapted.store);
    result.table.label = "C0-adapted";
    result.table.da_mode = "U";
  } else {
    result.table = evaluate(id, model, store);
  }
  return result;
}

std::vector<std::vector<AccuracyTable>> sweep(const FeatureStore& store, const Profile& profile,
                                              const std::filesystem::path& out_dir,
                                              const std::vector<std::uint64_t>& seeds,
                                              std::ostream* progress) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  std::vector<std::vector<AccuracyTable>> all;
  for (const auto seed : seeds) {
    const auto dir = seeds.size() > 1 ? out_dir / ("seed_" + std::to_string(seed)) : out_dir;
    std::filesystem::create_directories(dir);
    std::vector<AccuracyTable> tables;
    std::optional<Checkpoint> c0;
    for (const auto id : kAllConfigs) {
      const auto started = std::chrono::steady_clock::now();
      std::ofstream log(dir / (std::string(to_string(id)) + ".log.csv"), std::ios::trunc);
      if (!log) throw DataError("cannot write training log in " + dir.string());
      ExperimentOptions opts;
      opts.seed = seed;
      opts.train_options.log = &log;
      auto r = run_experiment(id, store, profile, opts);
      save_checkpoint(r.checkpoint, dir / (std::string(to_string(id)) + ".ckpt"));
      tables.push_back(r.table);
      if (id == ConfigId::C0) c0 = std::move(r.checkpoint);
      if (progress) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        *progress << "seed " << seed << ' ' << to_string(id) << " done in " << secs << " s\n";
      }
    }
    ExperimentOptions adapt;
    adapt.adapt = true;
    adapt.reuse = &*c0;
    tables.push_back(run_experiment(ConfigId::C0, store, profile, adapt).table);
    emit_results(tables, dir / "results.csv");
    all.push_back(std::move(tables));
  }
  return all;
}

}  // namespace dasc
