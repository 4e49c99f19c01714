#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace clustercl {

struct F1Result {
  double mean_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
};

// Macro F1 over all K classes. A class whose precision + recall is zero
// (including one absent from both inputs) scores 0 and still counts.
F1Result mean_f1(std::span<const int> predictions, std::span<const int> labels, int num_classes);

}  // namespace clustercl
