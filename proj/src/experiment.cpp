#include "clustercl/experiment.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace clustercl {

using nlohmann::json;

DatasetCache prepare_dataset(const ExperimentConfig& cfg) {
  const DatasetKind kind = parse_dataset_kind(cfg.data.dataset);
  SyntheticConfig synth = cfg.data.synthetic;
  synth.seed = derive_seed(cfg.seed, "data.synthetic");
  const IngestResult ingested = ingest(cfg.data.root, kind, synth);
  WindowingResult windowed = window(ingested.recordings, cfg.data.window, cfg.data.overlap, ingested.class_count,
                                    ingested.channel_names);
  if (windowed.dataset.empty()) throw ConfigError("no recording is at least " + std::to_string(cfg.data.window) + " samples long");

  const auto subjects = windowed.dataset.subjects();
  const bool fixed = cfg.data.split == "usc_had" || (cfg.data.split == "auto" && kind == DatasetKind::usc_had);
  SplitSpec spec = fixed
                       ? usc_had_split_spec(subjects)
                       : random_split_spec(subjects, cfg.data.test_fraction, cfg.data.val_fraction, derive_seed(cfg.seed, "data.split"));
  SplitResult parts = split(windowed.dataset, spec);

  DatasetCache cache;
  cache.dataset_name = cfg.data.dataset;
  cache.spec = spec;
  cache.overlap_fraction = cfg.data.overlap;
  cache.seed = cfg.seed;
  cache.stats = channel_stats(parts.train);
  if (!cfg.data.normalize) {
    cache.stats.mean.assign(cache.stats.mean.size(), 0.0f);
    cache.stats.stddev.assign(cache.stats.stddev.size(), 1.0f);
  }
  normalize(parts.train, cache.stats);
  normalize(parts.val, cache.stats);
  normalize(parts.test, cache.stats);
  cache.train = std::move(parts.train);
  cache.val = std::move(parts.val);
  cache.test = std::move(parts.test);
  return cache;
}

UnlabeledView pretrain_view(const DatasetCache& cache, const std::string& splits) {
  if (splits == "train") return strip_labels(cache.train);
  WindowedDataset all = cache.train;
  for (const auto* ds : {&cache.val, &cache.test}) all.windows.insert(all.windows.end(), ds->windows.begin(), ds->windows.end());
  return strip_labels(all);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetCache& cache, const PretrainHooks& hooks) {
  cfg.validate();
  const UnlabeledView view = pretrain_view(cache, cfg.pretrain_splits);
  const json experiment = cfg.to_json();
  ExperimentResult out;
  if (!cfg.repeat_pretrain) {
    out.pretrain = pretrain(view, cfg.pretrain_config(), experiment, hooks);
    out.pretrain.checkpoint.config_hash = cfg.fingerprint();
    out.report = evaluate(out.pretrain.checkpoint, cache.train, cache.val, cache.test, cfg.eval_config());
    return out;
  }
  const EvalConfig base_eval = cfg.eval_config();
  MetricsReport combined;
  for (int r = 0; r < base_eval.repeats; ++r) {
    PretrainConfig pc = cfg.pretrain_config();
    pc.seed = derive_seed(pc.seed, "repeat", static_cast<std::uint64_t>(r));
    out.pretrain = pretrain(view, pc, experiment, hooks);
    out.pretrain.checkpoint.config_hash = cfg.fingerprint();
    EvalConfig ec = base_eval;
    ec.repeats = 1;
    ec.seed = derive_seed(base_eval.seed, "repeat", static_cast<std::uint64_t>(r));
    MetricsReport one = evaluate(out.pretrain.checkpoint, cache.train, cache.val, cache.test, ec);
    if (r == 0) {
      combined = one;
      combined.per_repeat.clear();
      combined.best_epochs.clear();
      std::fill(combined.per_class_f1.begin(), combined.per_class_f1.end(), 0.0);
      for (auto& row : combined.confusion) std::fill(row.begin(), row.end(), 0);
    }
    combined.per_repeat.push_back(one.mean_f1);
    combined.best_epochs.push_back(one.best_epochs.front());
    for (std::size_t c = 0; c < combined.per_class_f1.size(); ++c) {
      combined.per_class_f1[c] += one.per_class_f1[c] / base_eval.repeats;
      for (std::size_t d = 0; d < combined.confusion[c].size(); ++d) combined.confusion[c][d] += one.confusion[c][d];
    }
  }
  combined.mean_f1 = std::accumulate(combined.per_repeat.begin(), combined.per_repeat.end(), 0.0) /
                     static_cast<double>(combined.per_repeat.size());
  out.report = std::move(combined);
  return out;
}

SweepGrid parse_sweep_grid(const json& doc) {
  if (!doc.is_object()) throw ConfigError("sweep grid must be a JSON object of key -> list");
  SweepGrid grid;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(ExperimentConfig::keys().begin(), ExperimentConfig::keys().end(), it.key()) == ExperimentConfig::keys().end()) {
      throw ConfigError("sweep grid: unknown config key '" + it.key() + "'");
    }
    if (!it.value().is_array() || it.value().empty()) throw ConfigError("sweep grid: '" + it.key() + "' needs a non-empty list");
    grid.emplace_back(it.key(), std::vector<json>(it.value().begin(), it.value().end()));
  }
  return grid;
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  }
  return s;
}

std::string scalar_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepGrid& grid, const DatasetCache& cache,
                            const std::filesystem::path& out_dir) {
  std::vector<SweepRow> rows;
  if (grid.empty()) return rows;
  std::vector<std::size_t> idx(grid.size(), 0);
  while (true) {
    SweepRow row;
    ExperimentConfig cfg = base;
    std::string id;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const auto& [key, values] = grid[a];
      row.values.emplace_back(key, values[idx[a]]);
      id += (id.empty() ? "" : "__") + sanitize(key + "=" + scalar_text(values[idx[a]]));
    }
    row.cell_id = id;
    try {
      for (const auto& [k, v] : row.values) cfg.set(k, v);
      cfg.run_id = sanitize(base.run_id + "." + id);
      const ExperimentResult res = run_experiment(cfg, cache);
      const auto dir = out_dir / "cells" / id;
      std::filesystem::create_directories(dir);
      json report = to_json(res.report);
      report["config"] = cfg.to_json();
      std::ofstream(dir / "metrics.json") << report.dump(2) << "\n";
      row.ok = true;
      row.mean_f1 = res.report.mean_f1;
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("sweep cell {} failed: {}", id, row.error);
    }
    rows.push_back(std::move(row));

    std::size_t a = grid.size();
    while (a-- > 0) {
      if (++idx[a] < grid[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == static_cast<std::size_t>(-1)) break;
  }
  return rows;
}

std::string sweep_csv(const SweepGrid& grid, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "cell";
  for (const auto& [key, _] : grid) out << "," << key;
  out << ",status,mean_f1,error\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.cell_id;
    for (const auto& [_, v] : r.values) out << "," << scalar_text(v);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << "," << (r.ok ? "ok" : "failed") << "," << (r.ok ? r.mean_f1 : 0.0) << "," << err << "\n";
  }
  return out.str();
}

Embedding embed(const Checkpoint& ckpt, const WindowedDataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size()) {
    spdlog::warn("embed: requested {} windows but only {} available", n, data.size());
    n = data.size();
  }
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "embed"));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Encoder<float> enc = ckpt.encoder;
  Embedding e;
  const auto x = gather(data, idx);
  e.representations = encode_all(enc, x, static_cast<Eigen::Index>(n), data.window_length);
  for (auto i : idx) e.labels.push_back(data.windows[i].activity_label);
  return e;
}

std::string embedding_csv(const Embedding& e) {
  std::ostringstream out;
  const Eigen::Index D = e.representations.cols();
  for (Eigen::Index d = 0; d < D; ++d) out << "r" << d << ",";
  out << "label\n";
  out << std::setprecision(9);
  for (Eigen::Index i = 0; i < e.representations.rows(); ++i) {
    for (Eigen::Index d = 0; d < D; ++d) out << e.representations(i, d) << ",";
    out << e.labels[static_cast<std::size_t>(i)] << "\n";
  }
  return out.str();
}

}  // namespace clustercl
