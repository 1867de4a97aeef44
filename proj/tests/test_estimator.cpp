#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "quadtv/estimator.hpp"
#include "quadtv/newton.hpp"
#include "quadtv/pipelines.hpp"

using namespace quadtv;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

OperatorSet identity_ops(const MeshPtr& m, Regularizer s, double alpha2, double beta) {
  SpMat t(m->size(), m->size());
  t.setIdentity();
  return make_operators(m, t, 1, s, alpha2, beta);
}

}  // namespace

TEST_CASE("zero data and zero state give a zero indicator") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(4, 4, {0, 0, 1, 1}));
  const OperatorSet ops = identity_ops(m, Regularizer::Gradient, 0.0, 1.0);
  ModelParams p;
  p.alpha2 = 0.0;
  p.beta = 1.0;
  const GridFunction g(m, 1);
  const SolverState s{GridFunction(m, 1), GridFunction(m, 1), GridFunction(m, 2)};
  const IndicatorField f = local_indicator(s, g, ops, p);
  CHECK(f.raw.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(f.shifted.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("indicator sums to the primal-dual gap") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (Regularizer sk : {Regularizer::Identity, Regularizer::Gradient}) {
    const MeshPtr m = make_mesh(QuadMesh::uniform(16, 16, {0, 0, 1, 1}).refine(std::vector<int>{17, 100, 101}));
    ModelParams p;
    p.alpha1 = 0.4;
    p.alpha2 = 2.0;
    p.lambda = 0.3;
    p.beta = sk == Regularizer::Gradient ? 0.1 : 0.0;
    p.gamma1 = 0.01;
    p.gamma2 = 0.02;
    const OperatorSet ops = identity_ops(m, sk, p.alpha2, p.beta);
    GridFunction g(m, 1);
    SolverState s{GridFunction(m, 1), GridFunction(m, 1), GridFunction(m, 2)};
    for (int i = 0; i < m->size(); ++i) {
      g(0, i) = unif(rng);
      s.u(0, i) = unif(rng);
      s.p1(0, i) = unif(rng);
      s.p2(0, i) = unif(rng);
      s.p2(1, i) = unif(rng);
    }
    s = project_duals(s, p);
    const IndicatorField f = local_indicator(s, g, ops, p);
    const double e = primal_energy(s.u.values(), g.values(), ops, p);
    const double d = dual_energy(s.p1.values(), s.p2.values(), g.values(), ops, p);
    CHECK(f.raw.sum() == doctest::Approx(e - d).epsilon(1e-10));
    CHECK(f.shifted.minCoeff() == 0.0);
    CHECK(f.raw_min == f.raw.minCoeff());
    CHECK((f.shifted.array() >= 0.0).all());
  }
}

TEST_CASE("infeasible duals are rejected") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(2, 2, {0, 0, 1, 1}));
  const OperatorSet ops = identity_ops(m, Regularizer::Identity, 10.0, 0.0);
  const ModelParams p;
  SolverState s{GridFunction(m, 1), GridFunction(m, 1), GridFunction(m, 2)};
  s.p2(0, 2) = 2.0;
  CHECK_THROWS_AS(local_indicator(s, GridFunction(m, 1), ops, p), std::invalid_argument);
}

TEST_CASE("disk: the largest indicators sit at the circle") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(32, 32, {-2, -2, 4, 4}));
  const PipelineConfig cfg = disk_defaults();
  const OperatorSet ops = identity_ops(m, cfg.s_kind, cfg.model.alpha2, cfg.model.beta);
  const GridFunction g = disk_data(m, 1.5);
  const auto [s, rep] = solve(g, ops, cfg.model);
  REQUIRE(rep.converged);
  const IndicatorField f = local_indicator(s, g, ops, cfg.model);
  std::vector<int> ids(static_cast<std::size_t>(m->size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) { return f.shifted[a] > f.shifted[b]; });
  const int top = m->size() / 10;
  int near = 0;
  for (int k = 0; k < top; ++k) {
    const Cell& c = m->cell(ids[k]);
    if (std::abs(std::hypot(c.cx, c.cy) - 1.5) <= 2 * c.h) ++near;
  }
  CHECK(near >= 0.7 * top);
}

TEST_CASE("Dorfler marking") {
  CHECK(dorfler_mark(vec({5, 3, 1, 1}), 0.0).empty());
  CHECK(dorfler_mark(vec({5, 3, 1, 1}), 0.6) == std::vector<int>{0, 1});
  CHECK(dorfler_mark(vec({0, 2, 0, 1}), 1.0) == std::vector<int>{1, 3});
  // Ties go to the lower id.
  CHECK(dorfler_mark(vec({1, 1, 1, 1}), 0.5) == std::vector<int>{0, 1});
  CHECK(dorfler_mark(vec({1, 4, 2, 4}), 0.5) == std::vector<int>{1, 3});
  const std::vector<int> cand{0, 2};
  CHECK(dorfler_mark(vec({5, 9, 1, 1}), 0.9, cand) == std::vector<int>{0, 2});
  CHECK_THROWS_AS(dorfler_mark(vec({1}), 1.5), std::invalid_argument);
}

TEST_CASE("Dorfler marking is minimal") {
  std::mt19937 rng(9);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> th(0.05, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd eta(40);
    for (int i = 0; i < 40; ++i) eta[i] = ex(rng);
    const double theta = th(rng);
    const std::vector<int> marked = dorfler_mark(eta, theta);
    REQUIRE_FALSE(marked.empty());
    double sum = 0.0, smallest = INFINITY;
    for (int i : marked) {
      sum += eta[i];
      smallest = std::min(smallest, eta[i]);
    }
    CHECK(sum >= theta * eta.sum() - 1e-12);
    CHECK(sum - smallest < theta * eta.sum());
    // No unmarked cell beats a marked one.
    double best_unmarked = 0.0;
    for (int i = 0; i < 40; ++i)
      if (!std::binary_search(marked.begin(), marked.end(), i)) best_unmarked = std::max(best_unmarked, eta[i]);
    CHECK(best_unmarked <= smallest);
  }
}

TEST_CASE("fraction marking") {
  CHECK(fraction_mark(vec({4, 3, 2, 1}), 0.75) == std::vector<int>{0, 1, 2});
  CHECK(fraction_mark(vec({1, 3, 4, 2}), 0.75) == std::vector<int>{1, 2, 3});
  CHECK(fraction_mark(vec({2, 2, 2, 2}), 0.5) == std::vector<int>{0, 1});
  CHECK(fraction_mark(vec({0, 0, 0}), 1.0) == std::vector<int>{0, 1, 2});
  CHECK(fraction_mark(vec({1, 2, 3}), 0.0).empty());
  for (int n : {1, 7, 10, 33, 100})
    for (double f : {0.1, 0.25, 0.75, 0.9}) {
      Eigen::VectorXd eta = Eigen::VectorXd::LinSpaced(n, 0, 1);
      CHECK(fraction_mark(eta, f).size() == static_cast<std::size_t>(std::ceil(f * n - 1e-9)));
    }
}

TEST_CASE("bulk filter") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(3, 1, {0, 0, 3, 1}));
  GridFunction g(m, 1), u(m, 1);
  g.values() << 0.1, 0.2, 0.3;
  CHECK(bulk_filter(g, g, 0.1).empty());
  u = g;
  u(0, 1) += 0.2;
  u(0, 2) += 0.05;
  CHECK(bulk_filter(u, g, 0.1) == std::vector<int>{1});
  CHECK(bulk_filter(u, g, 0.0) == std::vector<int>{1, 2});
}
