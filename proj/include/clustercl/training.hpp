#pragma once

// Contrastive pre-training, downstream linear evaluation / fine-tuning and
// the metrics they report.

#include "clustercl/augmentation.hpp"
#include "clustercl/clustering.hpp"
#include "clustercl/data.hpp"
#include "clustercl/loss.hpp"
#include "clustercl/metrics.hpp"
#include "clustercl/model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace clustercl {

struct PretrainConfig {
  double lr = 1e-3;
  int batch_size = 1024;
  int epochs = 200;
  int checkpoint_every = 0;  // epochs between intermediate checkpoints; 0 = final only
  std::uint64_t seed = 0;
  LossConfig loss;
  ClusterConfig cluster;  // k == 0 resolves to the dataset's class count
  AugmentationConfig aug;
  EncoderConfig encoder;
  ProjectionConfig projection;

  void validate() const;
};

// Windows with activity labels and subjects erased. Pre-training only ever
// sees this view.
struct UnlabeledView {
  std::vector<SensorWindow> windows;
  int window_length = 0;
  int channels = 0;
  int class_count_hint = 0;  // for resolving cluster.k == 0; not a label

  std::size_t size() const { return windows.size(); }
};

UnlabeledView strip_labels(const WindowedDataset& dataset);

struct StepLog {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double active_negatives_mean = 0.0;
};

nlohmann::json to_json(const StepLog& s);

struct PretrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;  // intermediate checkpoints
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

// `experiment` is stored verbatim in the checkpoint manifest.
PretrainResult pretrain(const UnlabeledView& data, const PretrainConfig& cfg, const nlohmann::json& experiment = {},
                        const PretrainHooks& hooks = {});

struct EvalConfig {
  FreezeMode mode = FreezeMode::linear_eval;
  double lr = 0.0;      // 0 = protocol default (1e-1 linear, 1e-2 fine-tune)
  int epochs = 200;
  int batch_size = 0;   // 0 = protocol default for the label fraction
  int repeats = 10;
  double label_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  double resolved_lr() const;
  int resolved_batch_size() const;
};

struct MetricsReport {
  double mean_f1 = 0.0;
  std::vector<double> per_class_f1;  // averaged over repeats
  std::vector<double> per_repeat;
  std::vector<int> best_epochs;
  std::vector<std::vector<std::int64_t>> confusion;  // summed over repeats
  std::string fingerprint;
  std::string mode;
  double label_fraction = 1.0;
  int batch_size = 0;
  double lr = 0.0;
  int epochs = 0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

// Trains a linear classifier on the (frozen or partially unfrozen) encoder,
// picks the epoch with the best validation mean F1 and reports that epoch's
// test mean F1, averaged over `repeats` independently seeded runs.
MetricsReport evaluate(const Checkpoint& ckpt, const WindowedDataset& train, const WindowedDataset& val,
                       const WindowedDataset& test, const EvalConfig& cfg);

}  // namespace clustercl
