#pragma once

// Declarative experiment configuration. Files are JSON with one object per
// section; every leaf maps to a dotted key (e.g. "cluster.dbscan.eps") and
// unknown keys are rejected. Precedence: defaults < config file < --set
// overrides < dedicated CLI flags.

#include "clustercl/data.hpp"
#include "clustercl/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace clustercl {

struct DataConfig {
  std::string dataset = "synthetic";
  std::string root;
  int window = 64;
  double overlap = 0.5;
  std::string split = "auto";  // auto (usc_had for USC-HAD, else random) | random | usc_had
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  bool normalize = true;
  SyntheticConfig synthetic;
};

struct ExperimentConfig {
  std::string run_id = "run";
  std::string output_dir;  // empty: $CLUSTERCL_OUTPUT_DIR, else "runs"
  std::uint64_t seed = 0;
  DataConfig data;
  AugmentationConfig aug;
  EncoderConfig encoder;
  ProjectionConfig projection;
  ClusterConfig cluster;  // cluster.k == 0 means "class count of the dataset"
  LossConfig loss;
  PretrainConfig pretrain;  // hyperparameters only; sections above are merged in by pretrain_config()
  EvalConfig eval;
  bool repeat_pretrain = false;
  // Which cached splits pre-training reads: "train" or "all".
  std::string pretrain_splits = "train";

  ExperimentConfig();

  // Applies one dotted key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const nlohmann::json& value);
  // "key=value"; the value is parsed as JSON, falling back to a plain string.
  void set_override(const std::string& assignment);
  void merge(const nlohmann::json& doc);
  void validate() const;

  // Canonical nested JSON, including every key.
  nlohmann::json to_json() const;
  // Hash of the canonical JSON excluding run_id/output_dir.
  std::string fingerprint() const;

  PretrainConfig pretrain_config() const;
  EvalConfig eval_config() const;
  std::filesystem::path run_dir() const;

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();
};

}  // namespace clustercl
