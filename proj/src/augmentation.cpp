#include "clustercl/augmentation.hpp"

#include <cmath>

namespace clustercl {

void AugmentationConfig::validate() const {
  if (!(factor_min > 0.0 && factor_min <= factor_max)) {
    throw ConfigError("aug: require 0 < factor_min <= factor_max");
  }
}

MatrixF resample(const MatrixF& values, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("resample: factor must be positive");
  const Eigen::Index W = values.rows();
  const Eigen::Index C = values.cols();
  if (W == 0) return values;
  const Eigen::Index M = std::max<Eigen::Index>(1, std::lround(static_cast<double>(W) * factor));
  if (M == W) return values;

  MatrixF stretched(M, C);
  for (Eigen::Index k = 0; k < M; ++k) {
    const double t = M > 1 ? static_cast<double>(k) * static_cast<double>(W - 1) / static_cast<double>(M - 1) : 0.0;
    const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(t)), W - 1);
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, W - 1);
    const double frac = t - static_cast<double>(lo);
    for (Eigen::Index c = 0; c < C; ++c) {
      const double a = values(lo, c);
      const double b = values(hi, c);
      stretched(k, c) = static_cast<float>(a + (b - a) * frac);
    }
  }

  if (M > W) return stretched.middleRows((M - W) / 2, W);
  MatrixF out(W, C);
  out.topRows(M) = stretched;
  for (Eigen::Index r = M; r < W; ++r) out.row(r) = stretched.row(M - 1);
  return out;
}

SensorWindow resample(const SensorWindow& window, double factor) {
  SensorWindow out = window;
  out.values = resample(window.values, factor);
  return out;
}

Views make_views(std::span<const SensorWindow> batch, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("make_views: empty batch");
  std::uniform_real_distribution<double> draw(cfg.factor_min, cfg.factor_max);
  Views v;
  v.view1.reserve(batch.size());
  v.view2.reserve(batch.size());
  for (const auto& w : batch) {
    const double f2 = cfg.factor_min == cfg.factor_max ? cfg.factor_min : draw(rng);
    if (cfg.symmetric_aug) {
      const double f1 = cfg.factor_min == cfg.factor_max ? cfg.factor_min : draw(rng);
      v.view1.push_back(resample(w, f1));
    } else {
      v.view1.push_back(w);
    }
    v.view2.push_back(resample(w, f2));
    v.factors.push_back(f2);
  }
  return v;
}

}  // namespace clustercl
