#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "quadtv/newton.hpp"
#include "quadtv/pipelines.hpp"

using namespace quadtv;

namespace {

struct Problem2 {
  MeshPtr mesh;
  OperatorSet ops;
  GridFunction g;
};

// Noisy step image on a mesh with one refined patch.
Problem2 denoise_problem(double alpha2, unsigned seed) {
  MeshPtr m = make_mesh(QuadMesh::uniform(12, 12, {0, 0, 1, 1}).refine(std::vector<int>{40, 41, 52, 53}));
  SpMat t(m->size(), m->size());
  t.setIdentity();
  OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, alpha2, 0.0);
  std::mt19937 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  GridFunction g(m, 1);
  for (int i = 0; i < m->size(); ++i) g(0, i) = (m->cell(i).cx < 0.45 ? 0.2 : 0.8) + noise(rng);
  return {m, std::move(ops), std::move(g)};
}

ModelParams denoise_params(double alpha1, double alpha2) {
  ModelParams p;
  p.alpha1 = alpha1;
  p.alpha2 = alpha2;
  p.lambda = 0.02;
  p.gamma1 = 1e-3;
  p.gamma2 = 1e-3;
  p.eps = 1e-8;
  return p;
}

}  // namespace

TEST_CASE("assemble_N replicates the per-cell dot product") {
  std::mt19937 rng(1);
  std::normal_distribution<double> d;
  const int n = 5, blocks = 4;
  Eigen::VectorXd v(blocks * n), w(blocks * n);
  for (int i = 0; i < blocks * n; ++i) {
    v[i] = d(rng);
    w[i] = d(rng);
  }
  const Eigen::VectorXd nw = assemble_N(v, n) * w;
  for (int i = 0; i < n; ++i) {
    double dot = 0.0;
    for (int b = 0; b < blocks; ++b) dot += v[b * n + i] * w[b * n + i];
    for (int b = 0; b < blocks; ++b) CHECK(nw[b * n + i] == doctest::Approx(dot).epsilon(1e-13));
  }
}

TEST_CASE("initial state is dual feasible") {
  const Problem2 pr = denoise_problem(10.0, 2);
  ModelParams p = denoise_params(0.3, 10.0);
  p.lambda = 1e-3;
  const SolverState s = initial_state(pr.g, pr.ops, p);
  CHECK(dual_feasible(s.p1.values(), s.p2.values(), pr.mesh->size(), p));
  CHECK((s.u.values() - pr.g.values()).norm() == 0.0);
}

TEST_CASE("every Newton step stays feasible and solves its system accurately") {
  const Problem2 pr = denoise_problem(10.0, 3);
  const ModelParams p = denoise_params(0.0, 10.0);
  SolverState s = initial_state(pr.g, pr.ops, p);
  for (int k = 0; k < 15; ++k) {
    StepReport rep;
    s = newton_step(s, pr.g, pr.ops, p, &rep);
    CHECK(dual_feasible(s.p1.values(), s.p2.values(), pr.mesh->size(), p));
    CHECK(rep.linear_residual <= 1e-8);
  }
}

TEST_CASE("L2-TV denoising converges and closes the duality gap") {
  const Problem2 pr = denoise_problem(10.0, 4);
  const ModelParams p = denoise_params(0.0, 10.0);
  const auto [s, rep] = solve(pr.g, pr.ops, p);
  CHECK(rep.converged);
  CHECK_FALSE(rep.hit_max_it);
  CHECK(rep.iterations == static_cast<int>(rep.residual_log.size()));
  CHECK(rep.residual_log.size() == rep.linear_residual_log.size());
  CHECK(rep.final_residual <= p.eps);
  CHECK(rep.final_residual == rep.residual_log.back());
  for (double r : rep.linear_residual_log) CHECK(r <= 1e-8);
  const double e = primal_energy(s.u.values(), pr.g.values(), pr.ops, p);
  const double d = dual_energy(s.p1.values(), s.p2.values(), pr.g.values(), pr.ops, p);
  CHECK(e - d >= -1e-12);
  CHECK(e - d <= 1e-6 * std::abs(e));
  // The total variation penalty pulls values towards the mean.
  CHECK(s.u.values().maxCoeff() < pr.g.values().maxCoeff());
}

TEST_CASE("L1-L2-TV denoising converges") {
  const Problem2 pr = denoise_problem(1.0, 5);
  const ModelParams p = denoise_params(1.0, 1.0);
  const auto [s, rep] = solve(pr.g, pr.ops, p);
  CHECK(rep.converged);
  CHECK(dual_feasible(s.p1.values(), s.p2.values(), pr.mesh->size(), p));
}

namespace {

struct Disk {
  MeshPtr mesh;
  OperatorSet ops;
  GridFunction g;
  ModelParams p;
};

Disk disk_toy() {
  MeshPtr m = make_mesh(QuadMesh::uniform(16, 16, {-2, -2, 4, 4}));
  SpMat t(m->size(), m->size());
  t.setIdentity();
  const PipelineConfig cfg = disk_defaults();
  OperatorSet ops = make_operators(m, t, 1, cfg.s_kind, cfg.model.alpha2, cfg.model.beta);
  return {m, std::move(ops), disk_data(m, 1.5), cfg.model};
}

}  // namespace

TEST_CASE("disk toy: residual after five steps is below the first") {
  Disk d = disk_toy();
  SolverState s = initial_state(d.g, d.ops, d.p);
  std::vector<double> log;
  for (int k = 0; k < 5; ++k) {
    s = newton_step(s, d.g, d.ops, d.p);
    log.push_back(residual(s, d.g, d.ops, d.p));
  }
  CHECK(log[4] < log[0]);
}

TEST_CASE("disk toy converges with the default tolerance") {
  Disk d = disk_toy();
  const auto [s, rep] = solve(d.g, d.ops, d.p);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 100);
}

TEST_CASE("disk toy with large smoothing: monotone residual") {
  Disk d = disk_toy();
  // Every |u - g| and |grad u| stays below gamma, so both active sets are empty.
  d.p.gamma1 = 10.0;
  d.p.gamma2 = 10.0;
  d.p.eps = 1e-12;
  const auto [s, rep] = solve(d.g, d.ops, d.p);
  REQUIRE(rep.converged);
  const MChi mc = weights_m_chi(s.u.values(), d.g.values(), d.ops, d.p);
  CHECK(mc.chi1.maxCoeff() == 0.0);
  CHECK(mc.chi2.maxCoeff() == 0.0);
  double prev = rep.initial_residual;
  for (double r : rep.residual_log) {
    CHECK(r <= prev);
    prev = r;
  }
}

TEST_CASE("Hessian in the smooth regime") {
  MeshPtr m = make_mesh(QuadMesh::uniform(6, 6, {0, 0, 1, 1}));
  SpMat t(m->size(), m->size());
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 10.0, 0.0);
  ModelParams p;
  p.alpha2 = 10.0;
  p.lambda = 0.1;
  p.gamma2 = 100.0;
  GridFunction g(m, 1);
  for (int i = 0; i < m->size(); ++i) g(0, i) = std::sin(3 * m->cell(i).cx) * m->cell(i).cy;
  const SolverState s{g, GridFunction(m, 1), GridFunction(m, 2)};
  const auto [h, rhs] = assemble_H_G(s, g, ops, p);
  CHECK(SpMat(h - SpMat(h.transpose())).norm() <= 1e-12 * h.norm());
  // alpha1 = 0, p2 = 0, chi2 = 0: B + grad* (lambda / gamma2) grad.
  const SpMat expected = ops.B + SpMat((p.lambda / p.gamma2) * ops.grad_adj * ops.grad);
  CHECK(SpMat(h - expected).norm() <= 1e-12 * h.norm());
}

TEST_CASE("2x2 toy: one step halves the residual") {
  MeshPtr m = make_mesh(QuadMesh::uniform(2, 2, {0, 0, 1, 1}));
  SpMat t(4, 4);
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 10.0, 0.0);
  ModelParams p;
  p.lambda = 0.05;
  p.gamma2 = 1e-3;
  GridFunction g(m, 1);
  g.values() << 0.0, 1.0, 0.2, 0.7;
  const SolverState s0 = initial_state(g, ops, p);
  const SolverState s1 = newton_step(s0, g, ops, p);
  CHECK(residual(s1, g, ops, p) <= 0.5 * residual(s0, g, ops, p));
}

TEST_CASE("a stationary state gives a vanishing step") {
  MeshPtr m = make_mesh(QuadMesh::uniform(4, 4, {0, 0, 1, 1}));
  SpMat t(16, 16);
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 10.0, 0.0);
  const ModelParams p;
  const GridFunction g = GridFunction::constant(m, 1, 0.3);
  const SolverState s{g, GridFunction(m, 1), GridFunction(m, 2)};
  StepReport rep;
  const SolverState next = newton_step(s, g, ops, p, &rep);
  CHECK(rep.du_norm <= 1e-10);
  CHECK((next.u.values() - g.values()).norm() <= 1e-10);
}

TEST_CASE("one cell: a single step solves the quadratic") {
  MeshPtr m = make_mesh(QuadMesh::uniform(1, 1, {0, 0, 1, 1}));
  SpMat t(1, 1);
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 4.0, 0.0);
  ModelParams p;
  p.alpha2 = 4.0;
  const GridFunction g = GridFunction::constant(m, 1, 0.7);
  const SolverState s{GridFunction(m, 1), GridFunction(m, 1), GridFunction(m, 2)};
  const SolverState next = newton_step(s, g, ops, p);
  CHECK(next.u(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("constant data converges at once") {
  MeshPtr m = make_mesh(QuadMesh::uniform(8, 8, {0, 0, 1, 1}));
  SpMat t(64, 64);
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 10.0, 0.0);
  const ModelParams p;
  const GridFunction g = GridFunction::constant(m, 1, 0.5);
  const auto [s, rep] = solve(g, ops, p);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK((s.u.values() - g.values()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("without regularization the data is returned") {
  MeshPtr m = make_mesh(QuadMesh::uniform(4, 4, {0, 0, 1, 1}));
  SpMat t(16, 16);
  t.setIdentity();
  const OperatorSet ops = make_operators(m, t, 1, Regularizer::Identity, 10.0, 0.0);
  ModelParams p;
  p.lambda = 0.0;
  GridFunction g(m, 1);
  for (int i = 0; i < 16; ++i) g(0, i) = 0.1 * i;
  const auto [s, rep] = solve(g, ops, p);
  CHECK(s.p2.values().norm() == 0.0);
  CHECK((s.u.values() - g.values()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("an iteration cap is reported") {
  const Problem2 pr = denoise_problem(10.0, 7);
  ModelParams p = denoise_params(0.0, 10.0);
  p.max_it = 1;
  p.eps = 1e-14;
  const auto [s, rep] = solve(pr.g, pr.ops, p);
  CHECK(rep.iterations == 1);
  CHECK(rep.hit_max_it);
  CHECK_FALSE(rep.converged);
}

TEST_CASE("zero smoothing parameters are rejected") {
  const Problem2 pr = denoise_problem(10.0, 8);
  ModelParams p = denoise_params(0.0, 10.0);
  p.gamma2 = 0.0;
  CHECK_THROWS_AS(solve(pr.g, pr.ops, p), std::invalid_argument);
}

TEST_CASE("optical flow on a translated pattern") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(16, 16, {0, 0, 16, 16}));
  auto tex = [](double x, double y) { return 0.5 + 0.2 * std::sin(0.35 * x + 0.2 * y) + 0.15 * std::cos(0.27 * y - 0.1 * x); };
  GridFunction f0(m, 1), f1(m, 1);
  for (int i = 0; i < m->size(); ++i) {
    f0(0, i) = tex(m->cell(i).cx, m->cell(i).cy);
    f1(0, i) = tex(m->cell(i).cx - 0.3, m->cell(i).cy);
  }
  const SpMat t = assemble_T(Problem::OpticalFlow, *m, &f1);
  const OperatorSet ops = make_operators(m, t, 2, Regularizer::Gradient, 0.0, 1e-5);
  // Linearised data: T u = T u0 - (f1 - f0) with u0 = 0.
  GridFunction g(m, 1, -(f1.values() - f0.values()));
  ModelParams p;
  p.alpha1 = 3.0;
  p.alpha2 = 0.0;
  p.lambda = 1.0;
  p.beta = 1e-5;
  p.eps = 1e-6;
  const auto [s, rep] = solve(g, ops, p);
  CHECK(rep.converged);
  CHECK(dual_feasible(s.p1.values(), s.p2.values(), m->size(), p));
}
