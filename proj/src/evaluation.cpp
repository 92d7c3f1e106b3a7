#include "dasc/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dasc/batch.hpp"
#include "dasc/errors.hpp"
#include "dasc/key_values.hpp"

namespace dasc {

const AccuracyCell* AccuracyTable::find(std::string_view name) const {
  for (const auto& c : cells)
    if (c.name == name) return &c;
  return nullptr;
}

double AccuracyTable::at(std::string_view name) const {
  const auto* c = find(name);
  if (!c) throw ConfigError("accuracy cell " + std::string(name) + " is absent for " + label);
  return c->accuracy;
}

std::size_t argmax_row(const Tensor& probs, std::size_t row) {
  const auto r = probs.row(row);
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[best]) best = i;
  return best;
}

namespace {

struct Counter {
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Index layout: [task][group][mask], task 0 = scene, group 0 = source.
struct Counters {
  Counter c[2][2][2];
};

}  // namespace

AccuracyTable evaluate_with(ConfigId id, const FeatureStore& store, Split split,
                            const Predictor& predict, std::size_t chunk) {
  if (chunk == 0) throw ConfigError("evaluation chunk must be positive");
  const bool masked = is_masked(id);
  const bool domain_cells = trains_domain_head(id);

  std::vector<std::size_t> clips;
  for (std::size_t i = 0; i < store.size(); ++i)
    if (store.clip(i).split == split) clips.push_back(i);

  std::vector<MaskKind> kinds = masked ? std::vector<MaskKind>{MaskKind::plus, MaskKind::minus}
                                       : std::vector<MaskKind>{MaskKind::all_ones};
  Counters counts;
  for (std::size_t start = 0; start < clips.size(); start += chunk) {
    const std::size_t end = std::min(clips.size(), start + chunk);
    const std::span<const std::size_t> part(clips.data() + start, end - start);
    const Tensor x = features_tensor(store, part);
    for (std::size_t m = 0; m < kinds.size(); ++m) {
      // Embedding width is irrelevant to the predictor's mask handling beyond
      // the kind, so the mask is rebuilt inside the model call.
      std::vector<MaskPattern> masks;
      masks.reserve(part.size());
      for (std::size_t r = 0; r < part.size(); ++r) masks.push_back(MaskPattern::make(kinds[m], 2));
      const Predictions p = predict(x, masks);
      for (std::size_t r = 0; r < part.size(); ++r) {
        const auto& rec = store.clip(part[r]);
        const std::size_t g = rec.domain == 0 ? 0 : 1;
        auto& sc = counts.c[0][g][m];
        ++sc.total;
        if (argmax_row(p.scene, r) == rec.scene) ++sc.correct;
        auto& dc = counts.c[1][g][m];
        ++dc.total;
        if (argmax_row(p.domain, r) == rec.domain) ++dc.correct;
      }
    }
  }

  AccuracyTable table;
  table.label = std::string(to_string(id));
  table.da_mode = std::string(da_mode(id));
  const char* tasks[2] = {"A", "D"};
  const char* groups[2] = {"S", "T"};
  for (int task = 0; task < 2; ++task) {
    if (task == 1 && !domain_cells) continue;
    for (int g = 0; g < 2; ++g) {
      for (std::size_t m = 0; m < kinds.size(); ++m) {
        const Counter& c = counts.c[task][g][m];
        if (c.total == 0) continue;
        std::string name = std::string("a_") + tasks[task] + "^" + groups[g];
        if (masked) name += kinds[m] == MaskKind::plus ? "+" : "-";
        table.cells.push_back(
            {name, static_cast<double>(c.correct) / static_cast<double>(c.total), c.total});
      }
    }
  }
  return table;
}

AccuracyTable evaluate(ConfigId id, const Model& model, const FeatureStore& store, Split split) {
  const auto& dims = store.dims();
  const auto& mc = model.config();
  if (mc.frames != dims.frames || mc.bands != dims.bands || mc.scenes != dims.scenes ||
      mc.domains != dims.domains) {
    throw ConfigError("checkpoint model dimensions do not match the feature store");
  }
  const std::size_t e = model.embedding_size();
  if (is_masked(id) && e % 2 != 0) throw ConfigError("masked evaluation needs an even embedding");
  // The core model runs once per chunk; each mask only re-applies the heads.
  std::optional<Tensor> cached_x;
  Tensor z;
  Predictor predict = [&](const Tensor& x, std::span<const MaskPattern> masks) {
    if (!cached_x || !(*cached_x == x)) {
      z = model.embed_values(x);
      cached_x = x;
    }
    Tensor z_tilde = z;
    for (std::size_t r = 0; r < masks.size(); ++r) {
      const MaskPattern mask = MaskPattern::make(masks[r].kind(), e);
      auto row = z_tilde.row(r);
      for (std::size_t j = 0; j < e; ++j) row[j] *= mask.bits()[j];
    }
    return model.predict_from_embedding(z_tilde);
  };
  return evaluate_with(id, store, split, predict);
}

std::string render_table(std::span<const AccuracyTable> tables) {
  // Union of cell names in first-seen order forms the columns.
  std::vector<std::string> columns;
  for (const auto& t : tables)
    for (const auto& c : t.cells)
      if (std::find(columns.begin(), columns.end(), c.name) == columns.end())
        columns.push_back(c.name);

  std::size_t label_w = 6;
  for (const auto& t : tables) label_w = std::max(label_w, t.label.size());
  std::size_t col_w = 7;
  for (const auto& c : columns) col_w = std::max(col_w, c.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label_w)) << "config" << "  "
     << std::setw(4) << "DA";
  for (const auto& c : columns) os << "  " << std::right << std::setw(static_cast<int>(col_w)) << c;
  os << '\n';
  for (const auto& t : tables) {
    os << std::left << std::setw(static_cast<int>(label_w)) << t.label << "  " << std::setw(4)
       << t.da_mode;
    for (const auto& c : columns) {
      os << "  " << std::right << std::setw(static_cast<int>(col_w));
      if (const auto* cell = t.find(c)) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(3) << cell->accuracy;
        os << v.str();
      } else {
        os << "-";
      }
    }
    os << '\n';
  }
  return os.str();
}

void emit_results(std::span<const AccuracyTable> tables, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw DataError("cannot write results to " + path.string());
  csv << "config,da_mode,cell_name,accuracy,n_clips\n";
  for (const auto& t : tables)
    for (const auto& c : t.cells)
      csv << t.label << ',' << t.da_mode << ',' << c.name << ',' << format_double(c.accuracy) << ','
          << c.n_clips << '\n';
  if (!csv) throw DataError("cannot write results to " + path.string());

  auto txt = path;
  txt.replace_extension(".txt");
  std::ofstream out(txt, std::ios::trunc);
  if (!out) throw DataError("cannot write results table to " + txt.string());
  out << render_table(tables);
}

}  // namespace dasc
