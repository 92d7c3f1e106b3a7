#include "dasc/batch.hpp"

#include <cmath>
#include <string>

#include "dasc/errors.hpp"

namespace dasc {

SourceFractions default_source_fractions(ConfigId id) {
  switch (id) {
    case ConfigId::C0: return {1.0, 1.0};
    case ConfigId::C1:
    case ConfigId::C2:
    case ConfigId::C3: return {1.0, 0.0};
    case ConfigId::C2M: return {1.0, 0.5};
    case ConfigId::C3M: return {0.5, 0.5};
  }
  return {1.0, 1.0};
}

void BatchSpec::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (is_masked(config) && batch_size % 4 != 0) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must be divisible by 4 for " +
                      std::string(to_string(config)));
  }
  if (config != ConfigId::C0 && batch_size % 2 != 0) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must be even for " +
                      std::string(to_string(config)));
  }
  for (double f : {up_source_fraction, down_source_fraction}) {
    if (f > 1.0) throw ConfigError("source fraction must be <= 1");
  }
}

std::vector<RowBlock> batch_layout(const BatchSpec& spec) {
  spec.validate();
  const auto defaults = default_source_fractions(spec.config);
  const double up_f = spec.up_source_fraction < 0.0 ? defaults.up : spec.up_source_fraction;
  const double down_f = spec.down_source_fraction < 0.0 ? defaults.down : spec.down_source_fraction;
  const std::size_t half = spec.batch_size / 2;

  auto split_half = [&](double fraction) {
    const double exact = fraction * static_cast<double>(half);
    const auto src = static_cast<std::size_t>(std::llround(exact));
    if (std::abs(exact - static_cast<double>(src)) > 1e-9) {
      throw ConfigError("source fraction " + std::to_string(fraction) +
                        " does not give a whole number of rows in a half of " +
                        std::to_string(half));
    }
    return src;
  };

  std::vector<RowBlock> blocks;
  auto push = [&](std::size_t rows, bool source, MaskKind mask, bool asc) {
    if (rows > 0) blocks.push_back({rows, source, mask, asc});
  };

  switch (spec.config) {
    case ConfigId::C0:
      push(spec.batch_size, true, MaskKind::all_ones, true);
      break;
    case ConfigId::C1:
    case ConfigId::C2:
    case ConfigId::C3: {
      const bool target_asc = spec.config != ConfigId::C2;
      push(half, true, MaskKind::all_ones, true);
      push(half, false, MaskKind::all_ones, target_asc);
      break;
    }
    case ConfigId::C2M:
    case ConfigId::C3M: {
      // Target rows carry no scene labels under C2M.
      const bool target_asc_up = spec.config == ConfigId::C3M;
      const auto up_src = split_half(up_f);
      const auto down_src = split_half(down_f);
      push(up_src, true, MaskKind::plus, true);
      push(half - up_src, false, MaskKind::plus, target_asc_up);
      push(down_src, true, MaskKind::minus, false);
      push(half - down_src, false, MaskKind::minus, false);
      break;
    }
  }
  return blocks;
}

Tensor features_tensor(const FeatureStore& store, std::span<const std::size_t> clips) {
  const auto& d = store.dims();
  Tensor x({clips.size(), d.frames, d.bands, 1});
  for (std::size_t r = 0; r < clips.size(); ++r) {
    const auto& m = store.features(clips[r]);
    auto row = x.row(r);
    for (std::size_t i = 0; i < m.values.size(); ++i) row[i] = m.values[i];
  }
  return x;
}

Batch compose_batch(const BatchSpec& spec, const FeatureStore& store, std::mt19937_64& rng) {
  const auto blocks = batch_layout(spec);
  const auto& dims = store.dims();
  if (spec.source_domain >= dims.domains) {
    throw ConfigError("source domain " + std::to_string(spec.source_domain) + " out of range");
  }

  std::vector<std::vector<std::size_t>> cells(dims.domains);
  for (std::size_t d = 0; d < dims.domains; ++d) cells[d] = store.select(d, Split::train);
  std::vector<std::size_t> targets;
  for (std::size_t d = 0; d < dims.domains; ++d)
    if (d != spec.source_domain) targets.push_back(d);

  auto require_cell = [&](std::size_t d) {
    if (cells[d].empty()) {
      throw DataError("no clips in cell (domain " + std::to_string(d) + ", split train)");
    }
  };

  Batch batch;
  std::size_t target_row = 0;
  for (const auto& block : blocks) {
    for (std::size_t i = 0; i < block.rows; ++i) {
      std::size_t domain = spec.source_domain;
      if (!block.source) {
        if (spec.per_device_quotas) {
          domain = targets[target_row % targets.size()];
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, targets.size() - 1);
          domain = targets[pick(rng)];
        }
        ++target_row;
      }
      require_cell(domain);
      std::uniform_int_distribution<std::size_t> pick_clip(0, cells[domain].size() - 1);
      batch.clip_indices.push_back(cells[domain][pick_clip(rng)]);
      batch.masks.push_back(MaskPattern::make(block.mask, spec.embedding_size));
      batch.asc_participates.push_back(block.asc_participates ? 1 : 0);
    }
  }

  const std::size_t rows = batch.clip_indices.size();
  batch.x = features_tensor(store, batch.clip_indices);
  batch.scene_targets = Tensor({rows, dims.scenes});
  batch.domain_targets = Tensor({rows, dims.domains});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& clip = store.clip(batch.clip_indices[r]);
    batch.scene_targets.at(r, clip.scene) = 1.0;
    batch.domain_targets.at(r, clip.domain) = 1.0;
  }
  return batch;
}

}  // namespace dasc
