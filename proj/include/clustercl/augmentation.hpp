#pragma once

#include "clustercl/data.hpp"

#include <span>
#include <vector>

namespace clustercl {

struct AugmentationConfig {
  double factor_min = 0.7;
  double factor_max = 1.3;
  // Resample both branches instead of leaving branch 1 untouched.
  bool symmetric_aug = false;

  void validate() const;
};

// Linear-interpolation resampling to round(W * factor) points spanning the
// original support, then center-crop (longer) or last-sample pad (shorter)
// back to W rows.
MatrixF resample(const MatrixF& values, double factor);
SensorWindow resample(const SensorWindow& window, double factor);

struct Views {
  std::vector<SensorWindow> view1;
  std::vector<SensorWindow> view2;
  std::vector<double> factors;  // factor applied to view2[i]
};

// view1[i] and view2[i] form the positive pair for source window i.
Views make_views(std::span<const SensorWindow> batch, const AugmentationConfig& cfg, Rng& rng);

}  // namespace clustercl
