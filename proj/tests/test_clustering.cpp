#include "clustercl/clustering.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

using namespace clustercl;

namespace {

MatrixD two_blobs(Rng& rng, int per_blob, double gap) {
  std::normal_distribution<double> g(0.0, 0.05);
  MatrixD x(2 * per_blob, 3);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const double centre = i < per_blob ? 0.0 : gap;
    for (int d = 0; d < 3; ++d) x(i, d) = centre + g(rng);
  }
  return x;
}

// Exhaustive minimum-SSE 2-partition.
std::vector<int> brute_force_two_means(const MatrixD& x) {
  const auto n = static_cast<int>(x.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  for (unsigned mask = 1; mask < (1u << (n - 1)); ++mask) {
    std::vector<int> l(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) l[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    double sse = 0.0;
    for (int c = 0; c < 2; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
      int m = 0;
      for (int i = 0; i < n; ++i)
        if (l[static_cast<std::size_t>(i)] == c) mean += x.row(i), ++m;
      mean /= m;
      for (int i = 0; i < n; ++i)
        if (l[static_cast<std::size_t>(i)] == c) sse += (x.row(i) - mean).squaredNorm();
    }
    if (sse < best) best = sse, best_labels = l;
  }
  return best_labels;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

ClusterAssignment random_assignment(Rng& rng, std::size_t n, int k) {
  ClusterAssignment a;
  a.labels = oracle::random_labels(rng, n, k);
  a.confident.assign(n, 1);
  a.cluster_count = k;
  return a;
}

bool is_identity(const BoolMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != (i == j)) return false;
  return true;
}

MatrixF as_float(const MatrixD& x) { return x.cast<float>(); }

}  // namespace

TEST_CASE("kmeans matches exhaustive 2-means on separated blobs") {
  Rng rng(1);
  const MatrixD x = two_blobs(rng, 6, 10.0);
  const std::vector<int> oracle_labels = brute_force_two_means(x);
  const ClusterAssignment a = kmeans(x, 2, 300, 1, 9);
  CHECK(same_partition(a.labels, oracle_labels));
  for (int i = 0; i < 6; ++i) CHECK(a.labels[static_cast<std::size_t>(i)] != a.labels[static_cast<std::size_t>(i + 6)]);
}

TEST_CASE("forced partitions") {
  Rng rng(2);
  const MatrixF p = as_float(oracle::random_unit_rows(rng, 12, 8));
  for (auto method : {ClusterMethod::kmeans, ClusterMethod::hierarchical, ClusterMethod::birch}) {
    ClusterConfig cfg;
    cfg.method = method;
    cfg.k = 12;
    const ClusterAssignment all = fit_predict(p, cfg);
    std::vector<int> sorted = all.labels;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 12; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    cfg.k = 1;
    const ClusterAssignment one = fit_predict(p, cfg);
    CHECK(std::set<int>(one.labels.begin(), one.labels.end()).size() == 1);
  }
  ClusterConfig big;
  big.k = 50;
  const ClusterAssignment fb = fit_predict(p, big);
  CHECK(fb.fallback);
  CHECK(fb.cluster_count == 12);
}

TEST_CASE("backends separate blobs") {
  Rng rng(3);
  const MatrixD x = two_blobs(rng, 10, 5.0);
  std::vector<int> truth(20);
  for (int i = 10; i < 20; ++i) truth[static_cast<std::size_t>(i)] = 1;
  for (auto l : {Linkage::average, Linkage::complete, Linkage::single, Linkage::ward}) {
    CHECK(same_partition(hierarchical(x, 2, l, Metric::euclidean).labels, truth));
  }
  CHECK(same_partition(birch(x, 2, 0.5, 50).labels, truth));
  CHECK(same_partition(birch(x, 2, 0.01, 3).labels, truth));  // exercises node splits
  const ClusterAssignment db = dbscan(x, 1.0, 3, Metric::euclidean);
  CHECK(same_partition(db.labels, truth));
}

TEST_CASE("dbscan noise points become singletons") {
  MatrixD x(5, 1);
  x << 0.0, 0.1, 0.2, 10.0, 20.0;
  const ClusterAssignment a = dbscan(x, 0.15, 2, Metric::euclidean);
  CHECK(a.labels[0] == a.labels[1]);
  CHECK(a.labels[1] == a.labels[2]);
  CHECK(a.labels[3] != a.labels[4]);
  CHECK(a.labels[3] != a.labels[0]);
  CHECK(a.cluster_count == 3);
}

TEST_CASE("apply_confidence counts") {
  MatrixF p(10, 1);
  for (int i = 0; i < 10; ++i) p(i, 0) = static_cast<float>(i);
  ClusterAssignment a;
  a.labels.assign(10, 0);
  a.confident.assign(10, 1);
  a.cluster_count = 1;
  const auto count = [](const ClusterAssignment& c) { return std::count(c.confident.begin(), c.confident.end(), 1); };
  CHECK(count(apply_confidence(a, p, 80.0)) == 8);
  CHECK(count(apply_confidence(a, p, 100.0)) == 10);
  CHECK(count(apply_confidence(a, p, 0.0)) == 0);
  CHECK(count(apply_confidence(a, p, 37.0)) == 4);  // ceil(3.7)
  const ClusterAssignment c = apply_confidence(a, p, 20.0);
  // Mean 4.5: members 4 and 5 tie; both are nearest.
  CHECK(c.confident[4] == 1);
  CHECK(c.confident[5] == 1);
  CHECK(apply_confidence(a, p, 100.0).labels == a.labels);
  CHECK_THROWS(apply_confidence(a, p, 101.0));

  ClusterAssignment pair;
  pair.labels = {0, 0};
  pair.confident = {1, 1};
  MatrixF q(2, 1);
  q << 0.0f, 1.0f;
  CHECK(count(apply_confidence(pair, q, 50.0)) == 1);
}

TEST_CASE("hand-enumerated masks") {
  ClusterAssignment a;
  a.labels = {0, 0};
  a.confident = {1, 1};
  const NegativeMask m = build_mask(a);
  CHECK(m.aa.all());
  CHECK_FALSE(m.ab(0, 0));
  CHECK(m.ab(0, 1));
  CHECK(m.ab(1, 0));
  CHECK_FALSE(m.ab(1, 1));

  const NegativeMask s = build_mask(singleton_assignment(5));
  CHECK(is_identity(s.aa));
  CHECK_FALSE(s.ab.any());

  a.confident = {0, 0};
  const NegativeMask z = build_mask(a);
  CHECK(is_identity(z.aa));
  CHECK_FALSE(z.ab.any());
}

TEST_CASE("mask properties over random assignments") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 16)(rng));
    const int k = std::uniform_int_distribution<int>(1, 6)(rng);
    const ClusterAssignment a = random_assignment(rng, n, k);
    const MatrixF p = as_float(oracle::random_unit_rows(rng, static_cast<Eigen::Index>(n), 4));
    const NegativeMask lo = build_mask(apply_confidence(a, p, 30.0));
    const NegativeMask hi = build_mask(apply_confidence(a, p, 90.0));
    for (const auto* m : {&lo, &hi}) {
      CHECK((m->aa == m->aa.transpose()).all());
      CHECK(m->aa.matrix().diagonal().all());
      CHECK_FALSE(m->ab.matrix().diagonal().any());
    }
    CHECK_FALSE((lo.aa && !hi.aa).any());
  }
}

TEST_CASE("clustering is deterministic for a fixed seed") {
  Rng rng(5);
  const MatrixF p = as_float(oracle::random_unit_rows(rng, 64, 8));
  for (auto method : {ClusterMethod::kmeans, ClusterMethod::birch, ClusterMethod::hierarchical, ClusterMethod::dbscan}) {
    ClusterConfig cfg;
    cfg.method = method;
    cfg.k = 4;
    cfg.seed = 17;
    CHECK(fit_predict(p, cfg).labels == fit_predict(p, cfg).labels);
  }
}

TEST_CASE("cosine metric uses directions only") {
  Rng rng(6);
  MatrixD x = oracle::random_unit_rows(rng, 20, 4);
  MatrixF scaled = x.cast<float>();
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= static_cast<float>(1 + i);
  ClusterConfig cfg;
  cfg.metric = Metric::cosine;
  cfg.k = 3;
  for (auto method : {ClusterMethod::kmeans, ClusterMethod::hierarchical}) {
    cfg.method = method;
    CHECK(same_partition(fit_predict(scaled, cfg).labels, fit_predict(x.cast<float>(), cfg).labels));
  }
}

TEST_CASE("cluster config parsing and validation") {
  CHECK(parse_cluster_method("birch") == ClusterMethod::birch);
  CHECK(parse_metric("cosine") == Metric::cosine);
  CHECK(parse_linkage("ward") == Linkage::ward);
  CHECK(parse_cluster_branch("first_only") == ClusterBranch::first_only);
  CHECK_THROWS_AS(parse_cluster_method("spectral"), ConfigError);
  ClusterConfig bad;
  bad.alpha = 120;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ClusterConfig{};
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
