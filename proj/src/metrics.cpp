#include "clustercl/metrics.hpp"

#include <stdexcept>
#include <string>

namespace clustercl {

F1Result mean_f1(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  if (labels.empty()) throw std::invalid_argument("mean_f1: no samples");
  if (predictions.size() != labels.size()) throw std::invalid_argument("mean_f1: prediction/label count mismatch");
  if (num_classes < 1) throw std::invalid_argument("mean_f1: num_classes must be positive");
  const auto K = static_cast<std::size_t>(num_classes);
  F1Result r;
  r.confusion.assign(K, std::vector<std::int64_t>(K, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
      throw std::invalid_argument("mean_f1: class id out of range at sample " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    std::int64_t tp = r.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < K; ++o) {
      if (o == c) continue;
      fp += r.confusion[o][c];
      fn += r.confusion[c][o];
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN), and is 0 whenever P+R is 0.
    const std::int64_t denom = 2 * tp + fp + fn;
    const double f1 = (tp == 0 || denom == 0) ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class_f1.push_back(f1);
    sum += f1;
  }
  r.mean_f1 = sum / static_cast<double>(K);
  return r;
}

}  // namespace clustercl
