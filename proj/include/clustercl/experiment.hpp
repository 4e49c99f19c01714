#pragma once

// End-to-end orchestration shared by the CLI and the acceptance suite.

#include "clustercl/config.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace clustercl {

// ingest -> window -> split -> per-channel z-score with train statistics.
DatasetCache prepare_dataset(const ExperimentConfig& cfg);

// Label-stripped pre-training input ("train" split or all splits).
UnlabeledView pretrain_view(const DatasetCache& cache, const std::string& splits);

struct ExperimentResult {
  PretrainResult pretrain;  // last pre-training run
  MetricsReport report;
};

// Pre-train then evaluate. With repeat_pretrain, every evaluation repeat
// gets its own pre-training run (seeded per repeat).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetCache& cache,
                                const PretrainHooks& hooks = {});

// Ordered (key, values) axes; the first axis varies slowest.
using SweepGrid = std::vector<std::pair<std::string, std::vector<nlohmann::json>>>;
SweepGrid parse_sweep_grid(const nlohmann::json& doc);

struct SweepRow {
  std::string cell_id;
  std::vector<std::pair<std::string, nlohmann::json>> values;
  bool ok = false;
  double mean_f1 = 0.0;
  std::string error;
};

// Runs every cell, writing <out_dir>/cells/<cell_id>/metrics.json for the
// successful ones. A failing cell is recorded and the sweep continues.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepGrid& grid, const DatasetCache& cache,
                            const std::filesystem::path& out_dir);
std::string sweep_csv(const SweepGrid& grid, const std::vector<SweepRow>& rows);

struct Embedding {
  MatrixF representations;  // [n x D_enc]
  std::vector<int> labels;
};

// Eval-mode encoder outputs for n windows sampled without replacement
// (n is clamped to the dataset size).
Embedding embed(const Checkpoint& ckpt, const WindowedDataset& data, std::size_t n, std::uint64_t seed);
std::string embedding_csv(const Embedding& e);

}  // namespace clustercl
