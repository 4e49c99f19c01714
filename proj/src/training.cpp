#include "clustercl/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace clustercl {

void PretrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("pretrain.lr must be positive");
  if (batch_size < 2) throw ConfigError("pretrain.batch_size must be >= 2");
  if (epochs < 1) throw ConfigError("pretrain.epochs must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("pretrain.checkpoint_every must be >= 0");
  loss.validate();
  aug.validate();
  encoder.validate();
  projection.validate();
  ClusterConfig c = cluster;
  if (c.k == 0) c.k = 1;
  c.validate();
}

UnlabeledView strip_labels(const WindowedDataset& dataset) {
  UnlabeledView v;
  v.window_length = dataset.window_length;
  v.channels = dataset.channels;
  v.class_count_hint = dataset.class_count;
  v.windows.reserve(dataset.size());
  for (const auto& w : dataset.windows) {
    SensorWindow s;
    s.values = w.values;
    s.activity_label = -1;
    s.id = w.id;
    v.windows.push_back(std::move(s));
  }
  return v;
}

nlohmann::json to_json(const StepLog& s) {
  return {{"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}, {"active_negatives_mean", s.active_negatives_mean}};
}

namespace {

std::vector<Param<float>*> all_params(Encoder<float>& enc, ProjectionHead<float>& head) {
  auto ps = enc.parameters();
  auto hs = head.parameters();
  ps.insert(ps.end(), hs.begin(), hs.end());
  return ps;
}

std::vector<float> stack_views(const Views& v, int window, int channels) {
  const std::size_t per = static_cast<std::size_t>(window) * static_cast<std::size_t>(channels);
  std::vector<float> x(2 * v.view1.size() * per);
  float* dst = x.data();
  for (const auto* view : {&v.view1, &v.view2}) {
    for (const auto& w : *view) {
      std::copy(w.values.data(), w.values.data() + per, dst);
      dst += per;
    }
  }
  return x;
}

// Flush-to-zero / denormals-are-zero for the lifetime of a training loop.
// Decaying optimizer moments otherwise hit the slow subnormal path.
class DenormalGuard {
 public:
#if defined(__SSE__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~DenormalGuard() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace

PretrainResult pretrain(const UnlabeledView& data, const PretrainConfig& cfg, const nlohmann::json& experiment,
                        const PretrainHooks& hooks) {
  cfg.validate();
  const DenormalGuard ftz;
  const auto n = data.size();
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  if (B > n) {
    throw ConfigError("pretrain.batch_size " + std::to_string(B) + " exceeds the " + std::to_string(n) +
                      " available windows");
  }
  ClusterConfig cluster = cfg.cluster;
  if (cluster.k == 0) cluster.k = std::max(1, data.class_count_hint);

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng aug_rng(derive_seed(cfg.seed, "augment"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  PretrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.encoder = Encoder<float>(cfg.encoder, data.channels, init_rng);
  ck.head = ProjectionHead<float>(cfg.projection, cfg.encoder.output_dim(), init_rng);
  ck.config = experiment;
  ck.config_hash = std::to_string(fnv1a64(experiment.dump()));
  Adam<float> adam(cfg.lr);
  const auto params = all_params(ck.encoder, ck.head);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps = n / B;  // the partial tail batch is dropped
  std::vector<SensorWindow> batch(B);
  int global_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < B; ++i) batch[i] = data.windows[order[s * B + i]];
      const Views views = make_views(batch, cfg.aug, aug_rng);
      const std::vector<float> x = stack_views(views, data.window_length, data.channels);

      const auto rows = static_cast<Eigen::Index>(2 * B);
      const MatrixF h = ck.encoder.forward(x, rows, data.window_length, true, &dropout_rng);
      const MatrixF z = ck.head.forward(h);
      const MatrixF p = l2_normalize_rows(z);
      const MatrixF p1 = p.topRows(static_cast<Eigen::Index>(B));
      const MatrixF p2 = p.bottomRows(static_cast<Eigen::Index>(B));

      ClusterAssignment asg_a, asg_b;
      const ClusterAssignment* pa = nullptr;
      const ClusterAssignment* pb = nullptr;
      if (cfg.loss.variant != LossVariant::nt_xent) {
        ClusterConfig cc = cluster;
        cc.seed = derive_seed(cfg.seed, "cluster", static_cast<std::uint64_t>(2 * global_step));
        asg_a = fit_predict(p1, cc);
        if (cfg.loss.variant == LossVariant::cluster_confidence) asg_a = apply_confidence(asg_a, p1, cc.alpha, cc.metric);
        pa = &asg_a;
        if (cluster.branch == ClusterBranch::per_term) {
          cc.seed = derive_seed(cfg.seed, "cluster", static_cast<std::uint64_t>(2 * global_step + 1));
          asg_b = fit_predict(p2, cc);
          if (cfg.loss.variant == LossVariant::cluster_confidence) asg_b = apply_confidence(asg_b, p2, cc.alpha, cc.metric);
          pb = &asg_b;
        }
      }

      MatrixF g1, g2;
      const LossBreakdown loss = contrastive_loss<float>(p1, p2, pa, pb, cfg.loss, &g1, &g2);
      MatrixF dp(rows, p.cols());
      dp.topRows(static_cast<Eigen::Index>(B)) = g1;
      dp.bottomRows(static_cast<Eigen::Index>(B)) = g2;
      for (auto* prm : params) prm->zero_grad();
      ck.encoder.backward(ck.head.backward(l2_normalize_backward(z, dp)));
      adam.step(params);

      StepLog entry{epoch, global_step, loss.total, loss.active_negatives_mean()};
      result.log.push_back(entry);
      if (hooks.on_step) hooks.on_step(entry);
      ++global_step;
    }
    ck.epoch = epoch;
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs && hooks.on_checkpoint) {
      hooks.on_checkpoint(ck);
    }
  }
  return result;
}

// ---------------------------------------------------------------- evaluation

void EvalConfig::validate() const {
  if (repeats < 1) throw ConfigError("eval.repeats must be >= 1");
  if (epochs < 0) throw ConfigError("eval.epochs must be >= 0");
  if (batch_size < 0) throw ConfigError("eval.batch_size must be >= 0");
  if (lr < 0.0) throw ConfigError("eval.lr must be >= 0");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw ConfigError("eval.label_fraction must lie in (0, 1]");
}

double EvalConfig::resolved_lr() const {
  if (lr > 0.0) return lr;
  return mode == FreezeMode::linear_eval ? 1e-1 : 1e-2;
}

int EvalConfig::resolved_batch_size() const {
  if (batch_size > 0) return batch_size;
  if (std::abs(label_fraction - 0.01) < 1e-9) return 50;
  if (std::abs(label_fraction - 0.1) < 1e-9) return 500;
  return 1024;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"mean_f1", r.mean_f1},
          {"per_class_f1", r.per_class_f1},
          {"per_repeat", r.per_repeat},
          {"best_epochs", r.best_epochs},
          {"confusion", r.confusion},
          {"fingerprint", r.fingerprint},
          {"mode", r.mode},
          {"label_fraction", r.label_fraction},
          {"batch_size", r.batch_size},
          {"lr", r.lr},
          {"epochs", r.epochs},
          {"warnings", r.warnings}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  j.at("mean_f1").get_to(r.mean_f1);
  j.at("per_class_f1").get_to(r.per_class_f1);
  j.at("per_repeat").get_to(r.per_repeat);
  j.at("best_epochs").get_to(r.best_epochs);
  j.at("confusion").get_to(r.confusion);
  j.at("fingerprint").get_to(r.fingerprint);
  j.at("mode").get_to(r.mode);
  j.at("label_fraction").get_to(r.label_fraction);
  j.at("batch_size").get_to(r.batch_size);
  j.at("lr").get_to(r.lr);
  j.at("epochs").get_to(r.epochs);
  j.at("warnings").get_to(r.warnings);
  return r;
}

namespace {

std::vector<int> argmax_rows(const MatrixF& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// One downstream model: encoder copy, classifier, optimizer.
class Downstream {
 public:
  Downstream(const Encoder<float>& encoder, int num_classes, const EvalConfig& cfg, std::uint64_t seed)
      : encoder_(encoder), mode_(cfg.mode), adam_(cfg.resolved_lr()), dropout_rng_(derive_seed(seed, "dropout")) {
    Rng init(derive_seed(seed, "classifier"));
    classifier_ = LinearClassifier<float>(encoder_.output_dim(), num_classes, init);
    apply_freeze_policy(encoder_, mode_);
    params_ = classifier_.parameters();
    if (mode_ == FreezeMode::fine_tune) {
      for (auto* p : encoder_.parameters()) {
        if (p->trainable) params_.push_back(p);
      }
    }
  }

  // Linear evaluation works on precomputed frozen features; fine-tuning
  // re-encodes raw windows in train mode.
  void train_step(const MatrixF& features_or_windows, Eigen::Index batch, Eigen::Index window, std::span<const int> y) {
    for (auto* p : params_) p->zero_grad();
    MatrixF h;
    if (mode_ == FreezeMode::linear_eval) {
      h = features_or_windows;
    } else {
      h = encoder_.forward(std::span<const float>(features_or_windows.data(), static_cast<std::size_t>(features_or_windows.size())),
                           batch, window, true, &dropout_rng_);
    }
    MatrixF dlogits;
    softmax_cross_entropy<float>(classifier_.forward(h), y, &dlogits);
    const bool tune = mode_ == FreezeMode::fine_tune;
    MatrixF dh = classifier_.backward(dlogits, tune);
    if (tune) encoder_.backward(dh);
    adam_.step(params_);
  }

  std::vector<int> predict_features(const MatrixF& h) { return argmax_rows(classifier_.forward(h)); }
  Encoder<float>& encoder() { return encoder_; }

 private:
  Encoder<float> encoder_;
  FreezeMode mode_;
  LinearClassifier<float> classifier_;
  Adam<float> adam_;
  Rng dropout_rng_;
  std::vector<Param<float>*> params_;
};

MatrixF features_of(Encoder<float>& enc, const WindowedDataset& ds) {
  if (ds.empty()) return MatrixF(0, enc.output_dim());
  const auto x = gather_all(ds);
  return encode_all(enc, x, static_cast<Eigen::Index>(ds.size()), ds.window_length);
}

MatrixF select_rows(const MatrixF& m, std::span<const std::size_t> idx) {
  MatrixF out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

MetricsReport evaluate(const Checkpoint& ckpt, const WindowedDataset& train, const WindowedDataset& val,
                       const WindowedDataset& test, const EvalConfig& cfg) {
  cfg.validate();
  const DenormalGuard ftz;
  if (train.empty()) throw ConfigError("evaluate: empty training split");
  if (test.empty()) throw ConfigError("evaluate: empty test split");
  const int K = train.class_count;
  const int W = train.window_length;
  const int batch_size = cfg.resolved_batch_size();

  MetricsReport report;
  report.mode = to_string(cfg.mode);
  report.label_fraction = cfg.label_fraction;
  report.batch_size = batch_size;
  report.lr = cfg.resolved_lr();
  report.epochs = cfg.epochs;
  report.per_class_f1.assign(static_cast<std::size_t>(K), 0.0);
  report.confusion.assign(static_cast<std::size_t>(K), std::vector<std::int64_t>(static_cast<std::size_t>(K), 0));
  report.fingerprint = ckpt.config_hash;

  const auto train_counts = train.class_counts();
  const auto test_counts = test.class_counts();
  for (int c = 0; c < K; ++c) {
    if (test_counts[static_cast<std::size_t>(c)] > 0 && train_counts[static_cast<std::size_t>(c)] == 0) {
      report.warnings.push_back("class " + std::to_string(c) + " appears in test but not in train");
      spdlog::warn("evaluate: {}", report.warnings.back());
    }
  }

  // Frozen features are shared by every linear-evaluation repeat.
  Encoder<float> frozen = ckpt.encoder;
  MatrixF train_feat, val_feat, test_feat;
  if (cfg.mode == FreezeMode::linear_eval) {
    train_feat = features_of(frozen, train);
    val_feat = features_of(frozen, val);
    test_feat = features_of(frozen, test);
  }
  const std::vector<int> val_labels = labels_of(val);
  const std::vector<int> test_labels = labels_of(test);

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = derive_seed(cfg.seed, "eval.repeat", static_cast<std::uint64_t>(r));
    std::vector<std::size_t> subset;
    {
      // Keep window identity: budget over positions in `train`.
      WindowedDataset indexed = train;
      for (std::size_t i = 0; i < indexed.windows.size(); ++i) indexed.windows[i].id = static_cast<std::int64_t>(i);
      for (const auto& w : label_budget(indexed, cfg.label_fraction, derive_seed(seed, "budget")).windows) {
        subset.push_back(static_cast<std::size_t>(w.id));
      }
    }
    Downstream model(ckpt.encoder, K, cfg, seed);
    Rng shuffle(derive_seed(seed, "shuffle"));

    auto eval_split = [&](const WindowedDataset& ds, const MatrixF& feats) {
      if (cfg.mode == FreezeMode::linear_eval) return model.predict_features(feats);
      return model.predict_features(features_of(model.encoder(), ds));
    };

    F1Result best = mean_f1(eval_split(test, test_feat), test_labels, K);
    int best_epoch = 0;
    double best_val = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::shuffle(subset.begin(), subset.end(), shuffle);
      for (std::size_t start = 0; start < subset.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batch_size), subset.size() - start);
        const std::span<const std::size_t> idx(subset.data() + start, b);
        std::vector<int> y;
        for (auto i : idx) y.push_back(train.windows[i].activity_label);
        if (cfg.mode == FreezeMode::linear_eval) {
          model.train_step(select_rows(train_feat, idx), static_cast<Eigen::Index>(b), W, y);
        } else {
          const auto x = gather(train, idx);
          const MatrixF xm = Eigen::Map<const MatrixF>(x.data(), static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(x.size() / b));
          model.train_step(xm, static_cast<Eigen::Index>(b), W, y);
        }
      }
      const bool select_on_val = !val.empty();
      const double v = select_on_val ? mean_f1(eval_split(val, val_feat), val_labels, K).mean_f1 : 0.0;
      if (!select_on_val || v > best_val) {
        best_val = v;
        best_epoch = epoch;
        best = mean_f1(eval_split(test, test_feat), test_labels, K);
      }
    }
    report.per_repeat.push_back(best.mean_f1);
    report.best_epochs.push_back(best_epoch);
    for (int c = 0; c < K; ++c) {
      report.per_class_f1[static_cast<std::size_t>(c)] += best.per_class_f1[static_cast<std::size_t>(c)] / cfg.repeats;
      for (int d = 0; d < K; ++d) {
        report.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +=
            best.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
      }
    }
  }
  report.mean_f1 = std::accumulate(report.per_repeat.begin(), report.per_repeat.end(), 0.0) /
                   static_cast<double>(report.per_repeat.size());
  return report;
}

}  // namespace clustercl
