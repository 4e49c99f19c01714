#include "clustercl/clustering.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace clustercl {

ClusterMethod parse_cluster_method(const std::string& s) {
  if (s == "kmeans") return ClusterMethod::kmeans;
  if (s == "birch") return ClusterMethod::birch;
  if (s == "hierarchical") return ClusterMethod::hierarchical;
  if (s == "dbscan") return ClusterMethod::dbscan;
  throw ConfigError("unknown cluster.method '" + s + "'");
}

Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw ConfigError("unknown cluster.metric '" + s + "'");
}

Linkage parse_linkage(const std::string& s) {
  if (s == "average") return Linkage::average;
  if (s == "complete") return Linkage::complete;
  if (s == "single") return Linkage::single;
  if (s == "ward") return Linkage::ward;
  throw ConfigError("unknown cluster.hier.linkage '" + s + "'");
}

ClusterBranch parse_cluster_branch(const std::string& s) {
  if (s == "per_term") return ClusterBranch::per_term;
  if (s == "first_only") return ClusterBranch::first_only;
  throw ConfigError("unknown cluster.branch '" + s + "'");
}

std::string to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::birch: return "birch";
    case ClusterMethod::hierarchical: return "hierarchical";
    case ClusterMethod::dbscan: return "dbscan";
  }
  return "?";
}
std::string to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }
std::string to_string(Linkage l) {
  switch (l) {
    case Linkage::average: return "average";
    case Linkage::complete: return "complete";
    case Linkage::single: return "single";
    case Linkage::ward: return "ward";
  }
  return "?";
}
std::string to_string(ClusterBranch b) { return b == ClusterBranch::per_term ? "per_term" : "first_only"; }

void ClusterConfig::validate() const {
  if (k < 1) throw ConfigError("cluster.k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 100.0)) throw ConfigError("cluster.alpha must lie in [0, 100]");
  if (!(dbscan_eps > 0.0) || dbscan_min_samples < 1) throw ConfigError("cluster.dbscan: eps > 0 and min_samples >= 1");
  if (!(birch_threshold > 0.0) || birch_branching < 2) {
    throw ConfigError("cluster.birch: threshold > 0 and branching >= 2");
  }
  if (kmeans_max_iter < 1 || kmeans_n_init < 1) throw ConfigError("cluster.kmeans: max_iter and n_init must be >= 1");
}

ClusterAssignment singleton_assignment(std::size_t n) {
  ClusterAssignment a;
  a.labels.resize(n);
  std::iota(a.labels.begin(), a.labels.end(), 0);
  a.confident.assign(n, 1);
  a.cluster_count = static_cast<int>(n);
  return a;
}

namespace {

double sq_dist(const MatrixD& a, Eigen::Index i, const MatrixD& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

MatrixD normalized_rows(const MatrixD& x) {
  MatrixD out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0) out.row(i) /= n;
  }
  return out;
}

MatrixD pairwise_distances(const MatrixD& x, Metric metric) {
  const Eigen::Index n = x.rows();
  MatrixD d(n, n);
  if (metric == Metric::cosine) {
    const MatrixD u = normalized_rows(x);
    d = (1.0 - (u * u.transpose()).array()).matrix();
    d.diagonal().setZero();
    d = d.cwiseMax(0.0);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::sqrt(sq_dist(x, i, x, j));
    }
  }
  return d;
}

// Relabels to 0..k-1 in order of first appearance.
int canonicalize(std::vector<int>& labels) {
  int next = 0;
  std::vector<std::pair<int, int>> seen;
  for (int& l : labels) {
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == l; });
    if (it == seen.end()) {
      seen.emplace_back(l, next);
      l = next++;
    } else {
      l = it->second;
    }
  }
  return next;
}

struct KmeansRun {
  std::vector<int> labels;
  MatrixD centroids;
  double inertia = std::numeric_limits<double>::infinity();
};

KmeansRun kmeans_once(const MatrixD& x, int k, int max_iter, Rng& rng) {
  const Eigen::Index n = x.rows();
  KmeansRun run;
  run.centroids.resize(k, x.cols());

  // k-means++ seeding
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index c0 = first(rng);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        c0 = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          r -= d2[static_cast<std::size_t>(i)];
          if (r <= 0 && d2[static_cast<std::size_t>(i)] > 0) {
            c0 = i;
            break;
          }
        }
      } else {
        c0 = std::find(chosen.begin(), chosen.end(), 0) - chosen.begin();
      }
    }
    chosen[static_cast<std::size_t>(c0)] = 1;
    run.centroids.row(c) = x.row(c0);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(x, i, run.centroids, c));
    }
  }

  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(x, i, run.centroids, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(x, i, run.centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    MatrixD sums = MatrixD::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = run.labels[static_cast<std::size_t>(i)];
      sums.row(l) += x.row(i);
      ++counts[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        run.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: steal the point farthest from its own centroid.
      Eigen::Index far = 0;
      double far_d = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = run.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(l)] <= 1) continue;
        const double d = sq_dist(x, i, run.centroids, l);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      run.centroids.row(c) = x.row(far);
      changed = true;
    }
    if (!changed) break;
  }
  run.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) run.inertia += sq_dist(x, i, run.centroids, run.labels[static_cast<std::size_t>(i)]);
  return run;
}

// Union-find over original indices, used to cut a dendrogram.
struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

// Nearest-neighbour-chain agglomeration (valid for the reducible linkages
// offered here); cuts the dendrogram at k clusters. For ward, `d` holds
// squared Euclidean distances.
std::vector<int> agglomerate(MatrixD d, std::vector<double> sizes, int k, Linkage linkage) {
  const auto n = static_cast<int>(d.rows());
  struct Merge {
    int a, b;
    double height;
  };
  std::vector<Merge> merges;
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<int> chain;
  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) chain.push_back(static_cast<int>(std::find(active.begin(), active.end(), 1) - active.begin()));
    const int a = chain.back();
    const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
    int b = -1;
    double best = std::numeric_limits<double>::infinity();
    if (prev >= 0) {
      b = prev;
      best = d(a, prev);
    }
    for (int j = 0; j < n; ++j) {
      if (j == a || !active[static_cast<std::size_t>(j)]) continue;
      if (d(a, j) < best) {
        best = d(a, j);
        b = j;
      }
    }
    if (b != prev) {
      chain.push_back(b);
      continue;
    }
    chain.pop_back();
    chain.pop_back();
    const int keep = std::min(a, b), gone = std::max(a, b);
    merges.push_back({keep, gone, best});
    const double na = sizes[static_cast<std::size_t>(a)], nb = sizes[static_cast<std::size_t>(b)];
    for (int j = 0; j < n; ++j) {
      if (!active[static_cast<std::size_t>(j)] || j == a || j == b) continue;
      double v = 0;
      switch (linkage) {
        case Linkage::single: v = std::min(d(a, j), d(b, j)); break;
        case Linkage::complete: v = std::max(d(a, j), d(b, j)); break;
        case Linkage::average: v = (na * d(a, j) + nb * d(b, j)) / (na + nb); break;
        case Linkage::ward: {
          const double nj = sizes[static_cast<std::size_t>(j)];
          v = ((na + nj) * d(a, j) + (nb + nj) * d(b, j) - nj * best) / (na + nb + nj);
          break;
        }
      }
      d(keep, j) = d(j, keep) = v;
    }
    sizes[static_cast<std::size_t>(keep)] = na + nb;
    active[static_cast<std::size_t>(gone)] = 0;
    --remaining;
  }
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });
  DisjointSets sets(static_cast<std::size_t>(n));
  const int apply = std::max(0, n - k);
  for (int m = 0; m < apply && m < static_cast<int>(merges.size()); ++m) sets.unite(merges[static_cast<std::size_t>(m)].a, merges[static_cast<std::size_t>(m)].b);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = sets.find(i);
  canonicalize(labels);
  return labels;
}

// ---- BIRCH clustering-feature tree

struct Feature {
  double n = 0;
  Vector<double> ls;
  double ss = 0;

  static Feature of(const Vector<double>& x) { return {1.0, x, x.squaredNorm()}; }
  void add(const Feature& o) {
    n += o.n;
    ls += o.ls;
    ss += o.ss;
  }
  Vector<double> centroid() const { return ls / n; }
  double radius_with(const Feature& o) const {
    const double nn = n + o.n;
    const Vector<double> c = (ls + o.ls) / nn;
    return std::sqrt(std::max(0.0, (ss + o.ss) / nn - c.squaredNorm()));
  }
};

struct CfNode {
  bool leaf = true;
  std::vector<Feature> entries;
  std::vector<std::unique_ptr<CfNode>> children;
};

class CfTree {
 public:
  CfTree(double threshold, int branching) : threshold_(threshold), branching_(branching), root_(std::make_unique<CfNode>()) {}

  void insert(const Vector<double>& x) {
    auto sibling = insert_into(*root_, Feature::of(x));
    if (!sibling) return;
    auto old = std::move(root_);
    root_ = std::make_unique<CfNode>();
    root_->leaf = false;
    root_->entries = {summary(*old), summary(*sibling)};
    root_->children.push_back(std::move(old));
    root_->children.push_back(std::move(sibling));
  }

  std::vector<Vector<double>> leaf_centroids() const {
    std::vector<Vector<double>> out;
    collect(*root_, out);
    return out;
  }

 private:
  static Feature summary(const CfNode& node) {
    Feature f{0.0, Vector<double>::Zero(node.entries.front().ls.size()), 0.0};
    for (const auto& e : node.entries) f.add(e);
    return f;
  }

  static std::size_t closest(const CfNode& node, const Vector<double>& c) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
      const double d = (node.entries[i].centroid() - c).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  // Returns a new sibling when `node` had to split.
  std::unique_ptr<CfNode> insert_into(CfNode& node, const Feature& f) {
    const Vector<double> c = f.centroid();
    if (node.entries.empty()) {
      node.entries.push_back(f);
      return nullptr;
    }
    const std::size_t i = closest(node, c);
    if (node.leaf) {
      if (node.entries[i].radius_with(f) <= threshold_) {
        node.entries[i].add(f);
      } else {
        node.entries.push_back(f);
      }
    } else {
      auto sibling = insert_into(*node.children[i], f);
      if (sibling) {
        node.entries[i] = summary(*node.children[i]);
        node.entries.push_back(summary(*sibling));
        node.children.push_back(std::move(sibling));
      } else {
        node.entries[i].add(f);
      }
    }
    if (static_cast<int>(node.entries.size()) <= branching_) return nullptr;
    return split(node);
  }

  static std::unique_ptr<CfNode> split(CfNode& node) {
    const std::size_t m = node.entries.size();
    std::size_t s1 = 0, s2 = 1;
    double far = -1;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double d = (node.entries[i].centroid() - node.entries[j].centroid()).squaredNorm();
        if (d > far) {
          far = d;
          s1 = i;
          s2 = j;
        }
      }
    }
    const Vector<double> c1 = node.entries[s1].centroid(), c2 = node.entries[s2].centroid();
    CfNode left;
    auto right = std::make_unique<CfNode>();
    left.leaf = right->leaf = node.leaf;
    for (std::size_t i = 0; i < m; ++i) {
      const Vector<double> c = node.entries[i].centroid();
      const bool to_right = i == s2 || (i != s1 && (c - c2).squaredNorm() < (c - c1).squaredNorm());
      CfNode& dst = to_right ? *right : left;
      dst.entries.push_back(node.entries[i]);
      if (!node.leaf) dst.children.push_back(std::move(node.children[i]));
    }
    node = std::move(left);
    return right;
  }

  static void collect(const CfNode& node, std::vector<Vector<double>>& out) {
    if (node.leaf) {
      for (const auto& e : node.entries) out.push_back(e.centroid());
      return;
    }
    for (const auto& ch : node.children) collect(*ch, out);
  }

  double threshold_;
  int branching_;
  std::unique_ptr<CfNode> root_;
};

}  // namespace

ClusterAssignment kmeans(const MatrixD& x, int k, int max_iter, int n_init, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) >= n) {
    ClusterAssignment a = singleton_assignment(n);
    a.centroids = x;
    return a;
  }
  KmeansRun best;
  for (int r = 0; r < n_init; ++r) {
    Rng rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
    KmeansRun run = kmeans_once(x, k, max_iter, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  ClusterAssignment a;
  a.labels = std::move(best.labels);
  a.centroids = std::move(best.centroids);
  a.confident.assign(n, 1);
  a.cluster_count = k;
  return a;
}

ClusterAssignment dbscan(const MatrixD& x, double eps, int min_samples, Metric metric) {
  const Eigen::Index n = x.rows();
  const MatrixD d = pairwise_distances(x, metric);
  std::vector<std::vector<Eigen::Index>> nbrs(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d(i, j) <= eps) nbrs[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int cluster = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] != -1) continue;
    if (static_cast<int>(nbrs[static_cast<std::size_t>(i)].size()) < min_samples) continue;
    std::vector<Eigen::Index> frontier = {i};
    labels[static_cast<std::size_t>(i)] = cluster;
    while (!frontier.empty()) {
      const Eigen::Index p = frontier.back();
      frontier.pop_back();
      if (static_cast<int>(nbrs[static_cast<std::size_t>(p)].size()) < min_samples) continue;
      for (Eigen::Index q : nbrs[static_cast<std::size_t>(p)]) {
        if (labels[static_cast<std::size_t>(q)] == -1) {
          labels[static_cast<std::size_t>(q)] = cluster;
          frontier.push_back(q);
        }
      }
    }
    ++cluster;
  }
  // Noise points become singleton clusters.
  for (int& l : labels) {
    if (l == -1) l = cluster++;
  }
  ClusterAssignment a;
  a.labels = std::move(labels);
  a.confident.assign(static_cast<std::size_t>(n), 1);
  a.cluster_count = cluster;
  return a;
}

ClusterAssignment hierarchical(const MatrixD& x, int k, Linkage linkage, Metric metric) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (static_cast<std::size_t>(k) >= n) return singleton_assignment(n);
  MatrixD d;
  if (linkage == Linkage::ward) {
    // Ward is defined on Euclidean geometry; cosine maps onto the unit sphere first.
    const MatrixD u = metric == Metric::cosine ? normalized_rows(x) : x;
    d = pairwise_distances(u, Metric::euclidean).cwiseAbs2();
  } else {
    d = pairwise_distances(x, metric);
  }
  ClusterAssignment a;
  a.labels = agglomerate(std::move(d), std::vector<double>(n, 1.0), k, linkage);
  a.confident.assign(n, 1);
  a.cluster_count = *std::max_element(a.labels.begin(), a.labels.end()) + 1;
  return a;
}

ClusterAssignment birch(const MatrixD& x, int k, double threshold, int branching) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (static_cast<std::size_t>(k) >= n) return singleton_assignment(n);
  CfTree tree(threshold, branching);
  for (Eigen::Index i = 0; i < x.rows(); ++i) tree.insert(x.row(i).transpose());
  const auto subs = tree.leaf_centroids();
  MatrixD centers(static_cast<Eigen::Index>(subs.size()), x.cols());
  for (std::size_t s = 0; s < subs.size(); ++s) centers.row(static_cast<Eigen::Index>(s)) = subs[s].transpose();

  std::vector<int> sub_label(subs.size());
  if (static_cast<int>(subs.size()) > k) {
    MatrixD d = pairwise_distances(centers, Metric::euclidean).cwiseAbs2();
    sub_label = agglomerate(std::move(d), std::vector<double>(subs.size(), 1.0), k, Linkage::ward);
  } else {
    std::iota(sub_label.begin(), sub_label.end(), 0);
  }
  ClusterAssignment a;
  a.labels.resize(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
    a.labels[static_cast<std::size_t>(i)] = sub_label[static_cast<std::size_t>(best)];
  }
  a.cluster_count = canonicalize(a.labels);
  a.confident.assign(n, 1);
  return a;
}

ClusterAssignment fit_predict(const MatrixF& points, const ClusterConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) return {};
  MatrixD x = points.cast<double>();
  if (cfg.metric == Metric::cosine) x = normalized_rows(x);
  const bool centroid_based = cfg.method != ClusterMethod::dbscan;
  if (centroid_based && n < static_cast<std::size_t>(cfg.k)) {
    spdlog::warn("fit_predict: batch of {} is smaller than k={}; using singleton clusters", n, cfg.k);
    ClusterAssignment a = singleton_assignment(n);
    a.fallback = true;
    return a;
  }
  try {
    switch (cfg.method) {
      case ClusterMethod::kmeans: return kmeans(x, cfg.k, cfg.kmeans_max_iter, cfg.kmeans_n_init, cfg.seed);
      case ClusterMethod::birch: return birch(x, cfg.k, cfg.birch_threshold, cfg.birch_branching);
      case ClusterMethod::hierarchical: return hierarchical(x, cfg.k, cfg.linkage, cfg.metric);
      case ClusterMethod::dbscan: return dbscan(x, cfg.dbscan_eps, cfg.dbscan_min_samples, cfg.metric);
    }
  } catch (const std::exception& e) {
    spdlog::warn("fit_predict: {} failed ({}); using singleton clusters", to_string(cfg.method), e.what());
  }
  ClusterAssignment a = singleton_assignment(n);
  a.fallback = true;
  return a;
}

ClusterAssignment apply_confidence(const ClusterAssignment& asg, const MatrixF& points, double alpha, Metric metric) {
  if (!(alpha >= 0.0 && alpha <= 100.0)) throw std::invalid_argument("apply_confidence: alpha must lie in [0, 100]");
  const auto n = asg.labels.size();
  if (static_cast<std::size_t>(points.rows()) != n) throw std::invalid_argument("apply_confidence: size mismatch");
  ClusterAssignment out = asg;
  out.confident.assign(n, 0);
  if (n == 0) return out;
  MatrixD x = points.cast<double>();
  if (metric == Metric::cosine) x = normalized_rows(x);

  const int k = *std::max_element(asg.labels.begin(), asg.labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(asg.labels[i])].push_back(i);
  const bool have_centroids = asg.centroids.rows() >= k && asg.centroids.cols() == x.cols();

  for (int c = 0; c < k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty()) continue;
    Vector<double> center;
    if (have_centroids) {
      center = asg.centroids.row(c).transpose();
    } else {
      center = Vector<double>::Zero(x.cols());
      for (auto i : m) center += x.row(static_cast<Eigen::Index>(i)).transpose();
      center /= static_cast<double>(m.size());
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    for (auto i : m) {
      const auto row = x.row(static_cast<Eigen::Index>(i)).transpose();
      double d;
      if (metric == Metric::cosine) {
        const double denom = row.norm() * center.norm();
        d = denom > 0 ? 1.0 - row.dot(center) / denom : 1.0;
      } else {
        d = (row - center).norm();
      }
      ranked.emplace_back(d, i);
    }
    std::sort(ranked.begin(), ranked.end());  // ties resolve to the lower index
    // Small epsilon keeps exact products such as 80 * 10 / 100 from rounding up.
    const auto keep = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m.size()) / 100.0 - 1e-9));
    for (std::size_t r = 0; r < std::min(keep, ranked.size()); ++r) out.confident[ranked[r].second] = 1;
  }
  return out;
}

NegativeMask build_mask(const ClusterAssignment& asg) {
  const auto n = static_cast<Eigen::Index>(asg.labels.size());
  if (asg.confident.size() != asg.labels.size()) throw std::invalid_argument("build_mask: confidence flags missing");
  NegativeMask m;
  m.aa.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto b = static_cast<std::size_t>(j);
      m.aa(i, j) = i == j || (asg.confident[a] && asg.confident[b] && asg.labels[a] == asg.labels[b]);
    }
  }
  m.ab = m.aa;
  m.ab.matrix().diagonal().setConstant(false);
  return m;
}

}  // namespace clustercl
