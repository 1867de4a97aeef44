#include "quadtv/newton.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#ifdef QUADTV_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "quadtv/errors.hpp"

namespace quadtv {

namespace {

constexpr Eigen::Index kDirectLimit = 200000;
constexpr double kInnerTolerance = 1e-10;
constexpr double kAcceptTolerance = 1e-8;

Eigen::VectorXd lift(const Eigen::VectorXd& per_cell, Eigen::Index blocks) {
  return per_cell.replicate(blocks, 1);
}

template <class Solver>
Eigen::VectorXd direct_solve(Solver& lu, const SpMat& h, const Eigen::VectorXd& g, double& relres) {
  lu.compute(h);
  if (lu.info() != Eigen::Success) throw LinearSolveError("sparse LU factorization failed", -1, INFINITY);
  Eigen::VectorXd x = lu.solve(g);
  const double gn = g.norm();
  relres = (h * x - g).norm() / gn;
  for (int k = 0; k < 3 && relres > kInnerTolerance && std::isfinite(relres); ++k) {
    const Eigen::VectorXd defect = g - h * x;
    x += lu.solve(defect);
    relres = (h * x - g).norm() / gn;
  }
  return x;
}

Eigen::VectorXd linear_solve(const SpMat& h, const Eigen::VectorXd& g, double& relres, std::string& name) {
  const double gn = g.norm();
  if (gn == 0.0) {
    relres = 0.0;
    return Eigen::VectorXd::Zero(g.size());
  }
  if (h.rows() <= kDirectLimit) {
#ifdef QUADTV_HAVE_UMFPACK
    name = "umfpack";
    Eigen::UmfPackLU<SpMat> lu;
#else
    name = "sparselu";
    Eigen::SparseLU<SpMat> lu;
#endif
    return direct_solve(lu, h, g, relres);
  }
  name = "bicgstab-ilut";
  Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
  it.setTolerance(kInnerTolerance);
  it.setMaxIterations(5000);
  it.compute(h);
  Eigen::VectorXd x = it.solve(g);
  relres = (h * x - g).norm() / gn;
  return x;
}

void check_gammas(const ModelParams& p) {
  if (p.alpha1 > 0 && p.gamma1 <= 0) throw std::invalid_argument("Newton needs gamma1 > 0 when alpha1 > 0");
  if (p.lambda > 0 && p.gamma2 <= 0) throw std::invalid_argument("Newton needs gamma2 > 0 when lambda > 0");
}

}  // namespace

void NewtonReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "iteration,residual,linear_residual\n";
  for (std::size_t k = 0; k < residual_log.size(); ++k)
    out << k + 1 << ',' << residual_log[k] << ',' << linear_residual_log[k] << '\n';
}

SpMat assemble_N(const Eigen::VectorXd& v, int n) {
  const Eigen::Index blocks = v.size() / n;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(blocks * blocks * n));
  for (Eigen::Index a = 0; a < blocks; ++a)
    for (Eigen::Index b = 0; b < blocks; ++b)
      for (int i = 0; i < n; ++i)
        if (v[b * n + i] != 0.0) t.emplace_back(a * n + i, b * n + i, v[b * n + i]);
  SpMat m(v.size(), v.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

std::pair<SpMat, Eigen::VectorXd> assemble_H_G(const SolverState& s, const GridFunction& g, const OperatorSet& ops,
                                               const ModelParams& p) {
  check_gammas(p);
  const int n = ops.cells();
  const Eigen::VectorXd& u = s.u.values();
  if (u.size() != ops.T.cols() || g.values().size() != n) throw std::invalid_argument("assemble_H_G: dimension mismatch");
  const Eigen::VectorXd r = ops.T * u - g.values();
  const Eigen::VectorXd gu = ops.grad * u;
  const MChi mc = weights_m_chi(u, g.values(), ops, p);

  SpMat h = ops.B;
  Eigen::VectorXd rhs = -(ops.B * u) + p.alpha2 * (ops.T_adj * g.values());

  if (p.alpha1 > 0) {
    const Eigen::ArrayXd m1 = mc.m1.array();
    const Eigen::VectorXd d1 =
        (p.alpha1 / m1 - mc.chi1.array() * s.p1.values().array() * r.array() / m1.square()).matrix();
    h += SpMat(ops.T_adj * d1.asDiagonal() * ops.T);
    rhs -= ops.T_adj * (p.alpha1 * r.array() / m1).matrix();
  }
  if (p.lambda > 0) {
    const Eigen::Index blocks = gu.size() / n;
    const Eigen::ArrayXd m2 = lift(mc.m2, blocks).array();
    const Eigen::ArrayXd chi2 = lift(mc.chi2, blocks).array();
    const Eigen::ArrayXd dk = chi2 * s.p2.values().array() / m2.square();
    // K = diag(lambda / m2) - diag(dk) N(grad u), built directly.
    std::vector<Eigen::Triplet<double>> kt;
    kt.reserve(static_cast<std::size_t>(gu.size() * (blocks + 1)));
    for (Eigen::Index a = 0; a < blocks; ++a) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index row = a * n + i;
        kt.emplace_back(row, row, p.lambda / m2[row]);
        if (dk[row] == 0.0) continue;
        for (Eigen::Index b = 0; b < blocks; ++b) {
          const double v = gu[b * n + i];
          if (v != 0.0) kt.emplace_back(row, b * n + i, -dk[row] * v);
        }
      }
    }
    SpMat k(gu.size(), gu.size());
    k.setFromTriplets(kt.begin(), kt.end());
    h += SpMat(ops.grad_adj * k * ops.grad);
    rhs -= ops.grad_adj * (p.lambda * gu.array() / m2).matrix();
  }
  h.makeCompressed();
  return {std::move(h), std::move(rhs)};
}

SolverState newton_step(const SolverState& s, const GridFunction& g, const OperatorSet& ops, const ModelParams& p,
                        StepReport* report) {
  const int n = ops.cells();
  auto [h, rhs] = assemble_H_G(s, g, ops, p);
  double relres = 0.0;
  std::string name;
  const Eigen::VectorXd du = linear_solve(h, rhs, relres, name);
  if (!du.allFinite() || !(relres <= kAcceptTolerance))
    throw LinearSolveError("Newton linear solve did not reach the required accuracy", -1, relres);

  const Eigen::VectorXd& u = s.u.values();
  const Eigen::VectorXd r = ops.T * u - g.values();
  const Eigen::VectorXd gu = ops.grad * u;
  const MChi mc = weights_m_chi(u, g.values(), ops, p);

  SolverState out = s;
  out.u.values() = u + du;

  Eigen::VectorXd& p1 = out.p1.values();
  if (p.alpha1 > 0) {
    const Eigen::ArrayXd tdu = (ops.T * du).array();
    const Eigen::ArrayXd m1 = mc.m1.array();
    p1 = ((p.alpha1 * (r.array() + tdu) - mc.chi1.array() * s.p1.values().array() * r.array() * tdu / m1) / m1)
             .matrix();
  } else {
    p1.setZero();
  }

  Eigen::VectorXd& p2 = out.p2.values();
  if (p.lambda > 0) {
    const Eigen::Index blocks = gu.size() / n;
    const Eigen::VectorXd gdu = ops.grad * du;
    const Eigen::ArrayXd m2 = lift(mc.m2, blocks).array();
    const Eigen::ArrayXd chi2 = lift(mc.chi2, blocks).array();
    const Eigen::VectorXd prod = (gu.array() * gdu.array()).matrix();
    Eigen::VectorXd cell_dot = Eigen::VectorXd::Zero(n);
    for (Eigen::Index b = 0; b < blocks; ++b) cell_dot += prod.segment(b * n, n);
    const Eigen::ArrayXd ndu = lift(cell_dot, blocks).array();
    p2 = ((p.lambda * (gu.array() + gdu.array()) - chi2 * s.p2.values().array() * ndu / m2) / m2).matrix();
  } else {
    p2.setZero();
  }
  project_duals_inplace(p1, p2, n, p);

  if (report != nullptr) {
    report->du_norm = std::sqrt((ops.w_u.array() * du.array().square()).sum());
    report->linear_residual = relres;
  }
  return out;
}

SolverState initial_state(const GridFunction& g, const OperatorSet& ops, const ModelParams& p) {
  const MeshPtr& mesh = ops.mesh;
  const int m = ops.channels;
  GridFunction u(mesh, m, ops.T_adj * g.values());
  GridFunction p1(mesh, 1, ops.T * u.values());
  GridFunction p2(mesh, 2 * m, ops.grad * u.values());
  return project_duals({std::move(u), std::move(p1), std::move(p2)}, p);
}

std::pair<SolverState, NewtonReport> solve(const SolverState& initial, const GridFunction& g, const OperatorSet& ops,
                                           const ModelParams& p) {
  p.validate();
  check_gammas(p);
  NewtonReport rep;
  rep.linear_tolerance = kInnerTolerance;
#ifdef QUADTV_HAVE_UMFPACK
  rep.linear_solver = ops.T.cols() <= kDirectLimit ? "umfpack" : "bicgstab-ilut";
#else
  rep.linear_solver = ops.T.cols() <= kDirectLimit ? "sparselu" : "bicgstab-ilut";
#endif
  SolverState s = project_duals(initial, p);
  double res = residual(s, g, ops, p);
  rep.initial_residual = res;
  while (res > p.eps && rep.iterations < p.max_it) {
    StepReport step;
    try {
      s = newton_step(s, g, ops, p, &step);
    } catch (const LinearSolveError& e) {
      throw LinearSolveError(e.what(), rep.iterations + 1, e.relative_residual());
    }
    res = residual(s, g, ops, p);
    ++rep.iterations;
    rep.residual_log.push_back(res);
    rep.linear_residual_log.push_back(step.linear_residual);
  }
  rep.final_residual = res;
  rep.converged = res <= p.eps;
  rep.hit_max_it = !rep.converged;
  return {std::move(s), std::move(rep)};
}

std::pair<SolverState, NewtonReport> solve(const GridFunction& g, const OperatorSet& ops, const ModelParams& p) {
  return solve(initial_state(g, ops, p), g, ops, p);
}

}  // namespace quadtv
