#pragma once

// Per-mini-batch clustering of projections, confidence thresholding and the
// negative-exclusion mask consumed by the contrastive loss.

#include "clustercl/common.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace clustercl {

enum class ClusterMethod { kmeans, birch, hierarchical, dbscan };
enum class Metric { euclidean, cosine };
enum class Linkage { average, complete, single, ward };
// Which branch's projections define the mask of each loss term.
enum class ClusterBranch { per_term, first_only };

ClusterMethod parse_cluster_method(const std::string& s);
Metric parse_metric(const std::string& s);
Linkage parse_linkage(const std::string& s);
ClusterBranch parse_cluster_branch(const std::string& s);
std::string to_string(ClusterMethod m);
std::string to_string(Metric m);
std::string to_string(Linkage l);
std::string to_string(ClusterBranch b);

struct ClusterConfig {
  ClusterMethod method = ClusterMethod::kmeans;
  Metric metric = Metric::euclidean;
  int k = 3;
  double alpha = 100.0;
  std::uint64_t seed = 0;
  ClusterBranch branch = ClusterBranch::per_term;

  double dbscan_eps = 0.5;
  int dbscan_min_samples = 5;
  double birch_threshold = 0.5;
  int birch_branching = 50;
  Linkage linkage = Linkage::average;
  int kmeans_max_iter = 300;
  int kmeans_n_init = 1;

  void validate() const;
};

struct ClusterAssignment {
  std::vector<int> labels;
  MatrixD centroids;              // [k x D]; empty when the backend has none
  std::vector<char> confident;    // thr(alpha, i)
  int cluster_count = 0;
  bool fallback = false;          // singleton partition used instead of the backend

  std::size_t size() const { return labels.size(); }
};

// Each index in its own cluster, all confident: the NT-Xent partition.
ClusterAssignment singleton_assignment(std::size_t n);

// Clusters the rows of `points` (one mini-batch; no state carried between
// calls). k > N or a backend failure yields the singleton partition.
ClusterAssignment fit_predict(const MatrixF& points, const ClusterConfig& cfg);

// Individual backends, exposed for testing. Inputs are already in the space
// the metric implies.
ClusterAssignment kmeans(const MatrixD& x, int k, int max_iter, int n_init, std::uint64_t seed);
ClusterAssignment dbscan(const MatrixD& x, double eps, int min_samples, Metric metric);
ClusterAssignment hierarchical(const MatrixD& x, int k, Linkage linkage, Metric metric);
ClusterAssignment birch(const MatrixD& x, int k, double threshold, int branching);

// Marks the ceil(alpha * m / 100) members of each size-m cluster nearest its
// centroid (cluster mean when the backend has none) as confident; ties go to
// the lower index.
ClusterAssignment apply_confidence(const ClusterAssignment& asg, const MatrixF& points, double alpha,
                                   Metric metric = Metric::euclidean);

struct NegativeMask {
  BoolMatrix aa;  // true = excluded; diagonal always true
  BoolMatrix ab;  // aa with the diagonal cleared (the positive is never excluded)

  Eigen::Index size() const { return aa.rows(); }
};

NegativeMask build_mask(const ClusterAssignment& asg);

}  // namespace clustercl
