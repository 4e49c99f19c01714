#include "clustercl/experiment.hpp"

#include <doctest.h>

#include <numeric>

using namespace clustercl;

namespace {

// A small separable dataset shared by the training tests.
const DatasetCache& small_cache() {
  static const DatasetCache cache = [] {
    ExperimentConfig cfg;
    cfg.data.window = 32;
    cfg.data.synthetic.trials = 4;
    cfg.data.synthetic.length = 288;
    return prepare_dataset(cfg);
  }();
  return cache;
}

PretrainConfig small_pretrain() {
  PretrainConfig c;
  c.epochs = 2;
  c.batch_size = 64;
  c.encoder.conv_filters = {8, 8, 16};
  c.encoder.kernel_sizes = {8, 4, 4};
  c.projection.layer_dims = {16, 16, 16};
  c.cluster.k = 3;
  c.seed = 21;
  return c;
}

EvalConfig small_eval() {
  EvalConfig e;
  e.epochs = 10;
  e.repeats = 3;
  e.seed = 4;
  return e;
}

}  // namespace

TEST_CASE("pretrain log bookkeeping and determinism") {
  const UnlabeledView view = strip_labels(small_cache().train);
  for (const auto& w : view.windows) {
    CHECK(w.activity_label == -1);
    CHECK(w.subject_id.empty());
  }
  const PretrainResult a = pretrain(view, small_pretrain());
  CHECK(a.log.size() == (view.size() / 64) * 2);
  CHECK(a.checkpoint.epoch == 2);
  const PretrainResult b = pretrain(view, small_pretrain());
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  for (const auto& s : a.log) {
    CHECK(std::isfinite(s.loss));
    CHECK(s.active_negatives_mean <= 2.0 * 64 - 2);
  }
}

TEST_CASE("pretrain never reads activity labels") {
  WindowedDataset relabelled = small_cache().train;
  for (std::size_t i = 0; i < relabelled.size(); ++i) {
    relabelled.windows[i].activity_label = static_cast<int>((i * 7) % 3);
    relabelled.windows[i].subject_id = "x";
  }
  const PretrainResult a = pretrain(strip_labels(small_cache().train), small_pretrain());
  const PretrainResult b = pretrain(strip_labels(relabelled), small_pretrain());
  CHECK(a.log.back().loss == b.log.back().loss);
}

TEST_CASE("pretrain loss falls on separable data") {
  PretrainConfig c = small_pretrain();
  c.epochs = 20;
  const PretrainResult r = pretrain(strip_labels(small_cache().train), c);
  const std::size_t per_epoch = r.log.size() / 20;
  double first = 0, last = 0;
  for (std::size_t i = 0; i < per_epoch; ++i) {
    first += r.log[i].loss;
    last += r.log[r.log.size() - 1 - i].loss;
  }
  CHECK(last < first);
}

TEST_CASE("pretrain rejects oversized batches and reports checkpoints") {
  PretrainConfig c = small_pretrain();
  c.batch_size = static_cast<int>(small_cache().train.size()) + 1;
  CHECK_THROWS_AS(pretrain(strip_labels(small_cache().train), c), ConfigError);
  c = small_pretrain();
  c.checkpoint_every = 1;
  int seen = 0;
  PretrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint& ck) { seen += ck.epoch; };
  pretrain(strip_labels(small_cache().train), c, {}, hooks);
  CHECK(seen >= 1);
}

TEST_CASE("cluster branch options and all variants run") {
  for (auto v : {LossVariant::nt_xent, LossVariant::cluster, LossVariant::cluster_confidence}) {
    for (auto br : {ClusterBranch::per_term, ClusterBranch::first_only}) {
      PretrainConfig c = small_pretrain();
      c.epochs = 1;
      c.loss.variant = v;
      c.cluster.branch = br;
      c.cluster.alpha = 80;
      const PretrainResult r = pretrain(strip_labels(small_cache().train), c);
      CHECK(std::isfinite(r.log.back().loss));
    }
  }
}

TEST_CASE("evaluate repeats, protocol defaults and chance level") {
  const auto& cache = small_cache();
  const PretrainResult pre = pretrain(strip_labels(cache.train), small_pretrain());
  const MetricsReport r = evaluate(pre.checkpoint, cache.train, cache.val, cache.test, small_eval());
  CHECK(r.per_repeat.size() == 3);
  CHECK(r.best_epochs.size() == 3);
  CHECK(r.mean_f1 == doctest::Approx(std::accumulate(r.per_repeat.begin(), r.per_repeat.end(), 0.0) / 3.0).epsilon(1e-12));
  CHECK(r.per_class_f1.size() == 3);
  CHECK(r.lr == doctest::Approx(0.1));

  EvalConfig e = small_eval();
  e.label_fraction = 0.01;
  CHECK(e.resolved_batch_size() == 50);
  e.label_fraction = 0.1;
  e.mode = FreezeMode::fine_tune;
  CHECK(e.resolved_batch_size() == 500);
  CHECK(e.resolved_lr() == doctest::Approx(1e-2));

  EvalConfig zero = small_eval();
  zero.epochs = 0;
  zero.repeats = 5;
  const MetricsReport chance = evaluate(pre.checkpoint, cache.train, cache.val, cache.test, zero);
  CHECK(chance.mean_f1 < 0.75);

  const MetricsReport again = evaluate(pre.checkpoint, cache.train, cache.val, cache.test, small_eval());
  CHECK(to_json(again).dump() == to_json(r).dump());
  CHECK(metrics_report_from_json(to_json(r)).per_repeat == r.per_repeat);
}

TEST_CASE("fine-tuning trains more parameters and still runs") {
  const auto& cache = small_cache();
  const PretrainResult pre = pretrain(strip_labels(cache.train), small_pretrain());
  Encoder<float> lin = pre.checkpoint.encoder, ft = pre.checkpoint.encoder;
  apply_freeze_policy(lin, FreezeMode::linear_eval);
  apply_freeze_policy(ft, FreezeMode::fine_tune);
  CHECK(ft.trainable_parameter_count() > lin.trainable_parameter_count());
  EvalConfig e = small_eval();
  e.mode = FreezeMode::fine_tune;
  e.repeats = 1;
  e.epochs = 3;
  e.label_fraction = 0.1;
  const MetricsReport r = evaluate(pre.checkpoint, cache.train, cache.val, cache.test, e);
  CHECK(r.batch_size == 500);
  CHECK(r.mode == "fine_tune");
  CHECK(r.per_repeat.size() == 1);
}
