#include "clustercl/loss.hpp"

#include <cmath>
#include <numeric>

namespace clustercl {

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "nt_xent") return LossVariant::nt_xent;
  if (s == "cluster") return LossVariant::cluster;
  if (s == "cluster_confidence") return LossVariant::cluster_confidence;
  throw ConfigError("unknown loss.variant '" + s + "' (expected nt_xent|cluster|cluster_confidence)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::nt_xent: return "nt_xent";
    case LossVariant::cluster: return "cluster";
    case LossVariant::cluster_confidence: return "cluster_confidence";
  }
  return "?";
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("loss.temperature must be positive");
  if (!(large_num >= 1e6)) throw ConfigError("loss.large_num must be >= 1e6");
}

double LossBreakdown::active_negatives_mean() const {
  if (active_negatives.empty()) return 0.0;
  return std::accumulate(active_negatives.begin(), active_negatives.end(), 0.0) /
         static_cast<double>(active_negatives.size());
}

namespace {

template <typename T>
void check_unit_rows(const Matrix<T>& p, const char* what) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double n = static_cast<double>(p.row(i).norm());
    if (std::abs(n - 1.0) > 1e-3) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
  }
}

ClusterAssignment all_confident(ClusterAssignment a) {
  a.confident.assign(a.labels.size(), 1);
  return a;
}

// One cross-entropy term anchored on `anchor`. Accumulates the per-anchor
// losses and, if requested, gradients scaled by `grad_scale`.
template <typename T>
void loss_term(const Matrix<T>& anchor, const Matrix<T>& other, const NegativeMask& mask, const LossConfig& cfg,
               LossBreakdown& out, double grad_scale, Matrix<T>* d_anchor, Matrix<T>* d_other) {
  const Eigen::Index n = anchor.rows();
  const Matrix<T> logits = similarity_logits(anchor, other, mask, cfg.temperature, cfg.large_num);
  Matrix<T> g(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mx = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - mx).exp();
    const T sum = e.sum();
    out.per_anchor.push_back(static_cast<double>(std::log(sum) - (logits(i, i) - mx)));
    int active = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && !mask.ab(i, j)) ++active;
      if (!mask.aa(i, j)) ++active;
    }
    out.active_negatives.push_back(active);
    g.row(i) = e / sum;
    g(i, i) -= T(1);
  }
  if (!d_anchor) return;
  g *= static_cast<T>(grad_scale / cfg.temperature);
  const auto g_ab = g.leftCols(n);
  const auto g_aa = g.rightCols(n);
  d_anchor->noalias() += g_ab * other;
  d_anchor->noalias() += g_aa * anchor;
  d_anchor->noalias() += g_aa.transpose() * anchor;
  d_other->noalias() += g_ab.transpose() * anchor;
}

}  // namespace

template <typename T>
Matrix<T> similarity_logits(const Matrix<T>& anchor, const Matrix<T>& other, const NegativeMask& mask, double tau,
                            double large_num) {
  const Eigen::Index n = anchor.rows();
  if (other.rows() != n || other.cols() != anchor.cols()) throw std::invalid_argument("similarity_logits: shape mismatch");
  if (mask.aa.rows() != n || mask.ab.rows() != n) throw std::invalid_argument("similarity_logits: mask size mismatch");
  check_unit_rows(anchor, "similarity_logits");
  check_unit_rows(other, "similarity_logits");
  const T inv_tau = static_cast<T>(1.0 / tau);
  const T big = static_cast<T>(large_num);
  Matrix<T> logits(n, 2 * n);
  logits.leftCols(n).noalias() = anchor * other.transpose();
  logits.rightCols(n).noalias() = anchor * anchor.transpose();
  logits *= inv_tau;
  logits.leftCols(n).array() -= mask.ab.template cast<T>() * big;
  logits.rightCols(n).array() -= mask.aa.template cast<T>() * big;
  return logits;
}

template <typename T>
LossBreakdown contrastive_loss(const Matrix<T>& p1, const Matrix<T>& p2, const ClusterAssignment* asg_a,
                               const ClusterAssignment* asg_b, const LossConfig& cfg, Matrix<T>* grad_p1,
                               Matrix<T>* grad_p2) {
  cfg.validate();
  const Eigen::Index n = p1.rows();
  if (p2.rows() != n || p2.cols() != p1.cols()) throw std::invalid_argument("contrastive_loss: p1/p2 shape mismatch");
  if ((grad_p1 == nullptr) != (grad_p2 == nullptr)) throw std::invalid_argument("contrastive_loss: pass both gradients or neither");

  NegativeMask mask_a, mask_b;
  if (cfg.variant == LossVariant::nt_xent) {
    mask_a = mask_b = build_mask(singleton_assignment(static_cast<std::size_t>(n)));
  } else {
    if (asg_a == nullptr) throw std::invalid_argument("contrastive_loss: cluster variants need a cluster assignment");
    const ClusterAssignment* b = asg_b ? asg_b : asg_a;
    if (asg_a->size() != static_cast<std::size_t>(n) || b->size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("contrastive_loss: assignment size does not match the batch");
    }
    if (cfg.variant == LossVariant::cluster) {
      mask_a = build_mask(all_confident(*asg_a));
      mask_b = build_mask(all_confident(*b));
    } else {
      mask_a = build_mask(*asg_a);
      mask_b = build_mask(*b);
    }
  }

  LossBreakdown out;
  out.per_anchor.reserve(static_cast<std::size_t>(2 * n));
  if (grad_p1) {
    grad_p1->setZero(n, p1.cols());
    grad_p2->setZero(n, p2.cols());
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  loss_term(p1, p2, mask_a, cfg, out, scale, grad_p1, grad_p2);
  loss_term(p2, p1, mask_b, cfg, out, scale, grad_p2, grad_p1);
  out.total = std::accumulate(out.per_anchor.begin(), out.per_anchor.end(), 0.0) * scale;
  return out;
}

template <typename T>
LossBreakdown confidence_loss(const Matrix<T>& p1, const Matrix<T>& p2, const ClusterAssignment& asg_a,
                              const ClusterAssignment* asg_b, LossConfig cfg, Matrix<T>* grad_p1, Matrix<T>* grad_p2) {
  cfg.variant = LossVariant::cluster_confidence;
  return contrastive_loss(p1, p2, &asg_a, asg_b, cfg, grad_p1, grad_p2);
}

#define CLUSTERCL_INSTANTIATE(T)                                                                                 \
  template Matrix<T> similarity_logits<T>(const Matrix<T>&, const Matrix<T>&, const NegativeMask&, double, double); \
  template LossBreakdown contrastive_loss<T>(const Matrix<T>&, const Matrix<T>&, const ClusterAssignment*,      \
                                             const ClusterAssignment*, const LossConfig&, Matrix<T>*, Matrix<T>*); \
  template LossBreakdown confidence_loss<T>(const Matrix<T>&, const Matrix<T>&, const ClusterAssignment&,       \
                                            const ClusterAssignment*, LossConfig, Matrix<T>*, Matrix<T>*);

CLUSTERCL_INSTANTIATE(float)
CLUSTERCL_INSTANTIATE(double)

}  // namespace clustercl
