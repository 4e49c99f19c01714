#include "clustercl/loss.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace clustercl;

namespace {

ClusterAssignment with_labels(std::vector<int> labels, std::vector<char> confident = {}) {
  ClusterAssignment a;
  a.cluster_count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (confident.empty()) confident.assign(labels.size(), 1);
  a.labels = std::move(labels);
  a.confident = std::move(confident);
  return a;
}

LossConfig variant(LossVariant v, double tau = 0.1) {
  LossConfig c;
  c.variant = v;
  c.temperature = tau;
  return c;
}

}  // namespace

TEST_CASE("similarity logits on orthonormal rows") {
  const MatrixD e = MatrixD::Identity(3, 3);
  const MatrixD l = similarity_logits<double>(e, e, build_mask(singleton_assignment(3)), 1.0);
  REQUIRE(l.rows() == 3);
  REQUIRE(l.cols() == 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(l(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
      if (i == j) CHECK(l(i, 3 + j) < -1e8);
      else CHECK(l(i, 3 + j) == doctest::Approx(0.0));
    }
  }
  // A masked entry carries no softmax mass.
  const double mass = std::exp(l(0, 3) - l.row(0).maxCoeff()) / (l.row(0).array() - l.row(0).maxCoeff()).exp().sum();
  CHECK(mass < 1e-300);
}

TEST_CASE("similarity logits match per-pair dot products") {
  Rng rng(1);
  const MatrixD a = oracle::random_unit_rows(rng, 2, 5);
  const MatrixD o = oracle::random_unit_rows(rng, 2, 5);
  const MatrixD l = similarity_logits<double>(a, o, build_mask(singleton_assignment(2)), 0.5);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double ab = 0, aa = 0;
      for (int d = 0; d < 5; ++d) ab += a(i, d) * o(j, d), aa += a(i, d) * a(j, d);
      CHECK(l(i, j) == doctest::Approx(ab / 0.5).epsilon(1e-9));
      if (i != j) CHECK(l(i, 2 + j) == doctest::Approx(aa / 0.5).epsilon(1e-9));
    }
  }
  CHECK_THROWS(similarity_logits<double>(2.0 * a, o, build_mask(singleton_assignment(2)), 0.5));
}

TEST_CASE("hand-computed losses") {
  // N=1: only the positive remains in the denominator.
  Rng rng(2);
  const MatrixD x = oracle::random_unit_rows(rng, 1, 4);
  const MatrixD y = oracle::random_unit_rows(rng, 1, 4);
  CHECK(contrastive_loss<double>(x, y, nullptr, nullptr, variant(LossVariant::nt_xent)).total == 0.0);

  // N=2, one cluster, everything confident: all negatives masked.
  const MatrixD p1 = oracle::random_unit_rows(rng, 2, 4);
  const MatrixD p2 = oracle::random_unit_rows(rng, 2, 4);
  const ClusterAssignment same = with_labels({0, 0});
  CHECK(contrastive_loss<double>(p1, p2, &same, &same, variant(LossVariant::cluster)).total == doctest::Approx(0.0).epsilon(1e-12));

  // Orthonormal e1,e2 vs e3,e4 at tau=1: every anchor sees three exp(0) terms.
  MatrixD a = MatrixD::Zero(2, 4), b = MatrixD::Zero(2, 4);
  a(0, 0) = a(1, 1) = b(0, 2) = b(1, 3) = 1.0;
  const LossBreakdown l = contrastive_loss<double>(a, b, nullptr, nullptr, variant(LossVariant::nt_xent, 1.0));
  CHECK(l.total == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  for (double v : l.per_anchor) CHECK(v == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(l.active_negatives_mean() == doctest::Approx(2.0));
}

TEST_CASE("loss matches the brute-force oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 8)(rng));
    const MatrixD p1 = oracle::random_unit_rows(rng, static_cast<Eigen::Index>(n), 8);
    const MatrixD p2 = oracle::random_unit_rows(rng, static_cast<Eigen::Index>(n), 8);
    ClusterAssignment ca = with_labels(oracle::random_labels(rng, n, 3));
    ClusterAssignment cb = with_labels(oracle::random_labels(rng, n, 3));
    ca = apply_confidence(ca, p1.cast<float>(), 50.0);
    cb = apply_confidence(cb, p2.cast<float>(), 50.0);
    const LossBreakdown got = contrastive_loss<double>(p1, p2, &ca, &cb, variant(LossVariant::cluster_confidence));
    const auto want = oracle::symmetric_loss(p1, p2, ca.labels, ca.confident, cb.labels, cb.confident, 0.1);
    CHECK(got.total == doctest::Approx(want.total).epsilon(1e-9));
    for (std::size_t i = 0; i < 2 * n; ++i) {
      CHECK(got.per_anchor[i] >= 0.0);
      CHECK(std::abs(got.per_anchor[i] - want.per_anchor[i]) <= 1e-9);
    }
  }
}

TEST_CASE("reductions between variants") {
  Rng rng(4);
  const MatrixD p1 = oracle::random_unit_rows(rng, 6, 8);
  const MatrixD p2 = oracle::random_unit_rows(rng, 6, 8);
  const ClusterAssignment s = singleton_assignment(6);
  const ClusterAssignment labs = with_labels({0, 1, 0, 2, 1, 0});
  const double nt = contrastive_loss<double>(p1, p2, nullptr, nullptr, variant(LossVariant::nt_xent)).total;
  CHECK(contrastive_loss<double>(p1, p2, &s, &s, variant(LossVariant::cluster)).total == doctest::Approx(nt).epsilon(1e-12));

  const ClusterAssignment none = apply_confidence(labs, p1.cast<float>(), 0.0);
  const ClusterAssignment full = apply_confidence(labs, p1.cast<float>(), 100.0);
  CHECK(confidence_loss<double>(p1, p2, none, nullptr, {}).total == nt);
  const double cl = contrastive_loss<double>(p1, p2, &labs, nullptr, variant(LossVariant::cluster)).total;
  CHECK(confidence_loss<double>(p1, p2, full, nullptr, {}).total == cl);

  const ClusterAssignment half = apply_confidence(labs, p1.cast<float>(), 50.0);
  const double mid = confidence_loss<double>(p1, p2, half, nullptr, {}).total;
  CHECK(mid != doctest::Approx(nt));
  CHECK(mid != doctest::Approx(cl));
}

TEST_CASE("more exclusions never raise a per-anchor loss") {
  Rng rng(5);
  const MatrixD p1 = oracle::random_unit_rows(rng, 8, 4);
  const MatrixD p2 = oracle::random_unit_rows(rng, 8, 4);
  const ClusterAssignment coarse = with_labels({0, 0, 0, 0, 1, 1, 1, 1});
  const auto fine_loss = contrastive_loss<double>(p1, p2, nullptr, nullptr, variant(LossVariant::nt_xent));
  const auto coarse_loss = contrastive_loss<double>(p1, p2, &coarse, &coarse, variant(LossVariant::cluster));
  for (std::size_t i = 0; i < 16; ++i) CHECK(coarse_loss.per_anchor[i] < fine_loss.per_anchor[i]);
}

TEST_CASE("permutation equivariance") {
  Rng rng(6);
  const MatrixD p1 = oracle::random_unit_rows(rng, 5, 6);
  const MatrixD p2 = oracle::random_unit_rows(rng, 5, 6);
  const ClusterAssignment a = with_labels({0, 1, 1, 2, 0});
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  MatrixD q1(5, 6), q2(5, 6);
  std::vector<int> pl(5);
  for (int i = 0; i < 5; ++i) {
    q1.row(i) = p1.row(perm[static_cast<std::size_t>(i)]);
    q2.row(i) = p2.row(perm[static_cast<std::size_t>(i)]);
    pl[static_cast<std::size_t>(i)] = a.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const ClusterAssignment b = with_labels(pl);
  const auto l1 = contrastive_loss<double>(p1, p2, &a, nullptr, variant(LossVariant::cluster));
  const auto l2 = contrastive_loss<double>(q1, q2, &b, nullptr, variant(LossVariant::cluster));
  CHECK(l1.total == doctest::Approx(l2.total).epsilon(1e-12));
  for (int i = 0; i < 5; ++i) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    CHECK(l2.per_anchor[static_cast<std::size_t>(i)] == doctest::Approx(l1.per_anchor[src]).epsilon(1e-12));
    CHECK(l2.per_anchor[5 + static_cast<std::size_t>(i)] == doctest::Approx(l1.per_anchor[5 + src]).epsilon(1e-12));
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(7);
  const MatrixD p1 = oracle::random_unit_rows(rng, 4, 8);
  const MatrixD p2 = oracle::random_unit_rows(rng, 4, 8);
  const ClusterAssignment a = apply_confidence(with_labels({0, 1, 0, 1}), p1.cast<float>(), 50.0);
  const ClusterAssignment b = apply_confidence(with_labels({1, 1, 0, 0}), p2.cast<float>(), 50.0);
  for (auto v : {LossVariant::nt_xent, LossVariant::cluster, LossVariant::cluster_confidence}) {
    const LossConfig cfg = variant(v, 0.5);
    MatrixD g1, g2;
    contrastive_loss<double>(p1, p2, &a, &b, cfg, &g1, &g2);
    for (int which = 0; which < 2; ++which) {
      MatrixD x1 = p1, x2 = p2;
      MatrixD& x = which == 0 ? x1 : x2;
      MatrixD numeric(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double o = x.data()[i];
        x.data()[i] = o + 1e-4;
        const double up = contrastive_loss<double>(x1, x2, &a, &b, cfg).total;
        x.data()[i] = o - 1e-4;
        const double dn = contrastive_loss<double>(x1, x2, &a, &b, cfg).total;
        x.data()[i] = o;
        numeric.data()[i] = (up - dn) / 2e-4;
      }
      const MatrixD& analytic = which == 0 ? g1 : g2;
      CHECK((numeric - analytic).norm() / numeric.norm() <= 1e-3);
    }
  }
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_loss_variant("nt_xent") == LossVariant::nt_xent);
  CHECK_THROWS_AS(parse_loss_variant("triplet"), ConfigError);
}
