#pragma once

// NT-Xent, Cluster-NT-Xent and the confidence-thresholded variant, computed as
// masked cross-entropy over [ab | aa] similarity logits.

#include "clustercl/clustering.hpp"

#include <string>
#include <vector>

namespace clustercl {

enum class LossVariant { nt_xent, cluster, cluster_confidence };
LossVariant parse_loss_variant(const std::string& s);
std::string to_string(LossVariant v);

struct LossConfig {
  double temperature = 0.1;
  double large_num = 1e9;
  LossVariant variant = LossVariant::cluster;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;               // mean of per_anchor
  std::vector<double> per_anchor;   // [2N]: branch-1 anchors, then branch-2 anchors
  std::vector<int> active_negatives;  // unmasked non-positive candidates per anchor

  double active_negatives_mean() const;
};

// [N x 2N] logits: (anchor . other^T)/tau with large_num subtracted where
// mask.ab is set, then (anchor . anchor^T)/tau with large_num subtracted where
// mask.aa is set. Column i is the positive of row i.
template <typename T>
Matrix<T> similarity_logits(const Matrix<T>& anchor, const Matrix<T>& other, const NegativeMask& mask, double tau,
                            double large_num = 1e9);

// Both terms of the symmetric loss. `asg_a` masks the term anchored on p1,
// `asg_b` the term anchored on p2 (nullptr reuses asg_a). Assignments are
// ignored for nt_xent; the cluster variant treats every member as confident,
// the confidence variant honours the flags. Gradients w.r.t. p1/p2 are
// written when the output pointers are non-null.
template <typename T>
LossBreakdown contrastive_loss(const Matrix<T>& p1, const Matrix<T>& p2, const ClusterAssignment* asg_a,
                               const ClusterAssignment* asg_b, const LossConfig& cfg, Matrix<T>* grad_p1 = nullptr,
                               Matrix<T>* grad_p2 = nullptr);

// contrastive_loss with the cluster_confidence variant; assignments must
// already carry confidence flags.
template <typename T>
LossBreakdown confidence_loss(const Matrix<T>& p1, const Matrix<T>& p2, const ClusterAssignment& asg_a,
                              const ClusterAssignment* asg_b, LossConfig cfg, Matrix<T>* grad_p1 = nullptr,
                              Matrix<T>* grad_p2 = nullptr);

}  // namespace clustercl
