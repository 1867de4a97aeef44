#include "quadtv/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace quadtv {

void ModelParams::validate() const {
  if (alpha1 < 0 || alpha2 < 0 || lambda < 0 || beta < 0 || gamma1 < 0 || gamma2 < 0)
    throw std::invalid_argument("model parameters must be non-negative");
  if (r != 2) throw std::invalid_argument("only r = 2 is supported");
  if (!(eps > 0)) throw std::invalid_argument("Newton tolerance must be positive");
  if (max_it < 1) throw std::invalid_argument("max_it must be at least 1");
}

double huber(double x, double gamma) {
  const double a = std::abs(x);
  if (gamma <= 0.0) return a;
  return a <= gamma ? x * x / (2.0 * gamma) : a - gamma / 2.0;
}

Eigen::VectorXd cell_norms(const Eigen::VectorXd& w, int n) {
  const Eigen::Index blocks = w.size() / n;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index b = 0; b < blocks; ++b) s += w.segment(b * n, n).cwiseAbs2();
  return s.cwiseSqrt();
}

double frob_r(const GridFunction& w, int cell) {
  double s = 0.0;
  for (int k = 0; k < w.channels(); ++k) s += w(k, cell) * w(k, cell);
  return std::sqrt(s);
}

MChi weights_m_chi(const Eigen::VectorXd& u, const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p) {
  const int n = ops.cells();
  const Eigen::VectorXd r = ops.T * u - g;
  const Eigen::VectorXd gn = cell_norms(ops.grad * u, n);
  MChi w;
  w.m1.resize(n);
  w.chi1.resize(n);
  w.m2.resize(n);
  w.chi2.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = std::abs(r[i]);
    w.m1[i] = std::max(p.gamma1, a);
    w.chi1[i] = a >= p.gamma1 ? 1.0 : 0.0;
    w.m2[i] = std::max(p.gamma2, gn[i]);
    w.chi2[i] = gn[i] >= p.gamma2 ? 1.0 : 0.0;
  }
  return w;
}

double primal_energy(const Eigen::VectorXd& v, const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p) {
  const int n = ops.cells();
  if (v.size() != ops.T.cols() || g.size() != n) throw std::invalid_argument("primal_energy: dimension mismatch");
  const Eigen::VectorXd r = ops.T * v - g;
  const Eigen::VectorXd gn = cell_norms(ops.grad * v, n);
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = ops.w_data[i];
    e += w * (p.alpha1 * huber(r[i], p.gamma1) + 0.5 * p.alpha2 * r[i] * r[i] + p.lambda * huber(gn[i], p.gamma2));
  }
  if (p.beta != 0.0) {
    const Eigen::VectorXd sv = ops.S * v;
    const Eigen::VectorXd& ws = ops.s_kind == Regularizer::Identity ? ops.w_u : ops.w_grad;
    e += 0.5 * p.beta * (ws.array() * sv.array().square()).sum();
  }
  return e;
}

double primal_energy(const GridFunction& v, const GridFunction& g, const OperatorSet& ops, const ModelParams& p) {
  return primal_energy(v.values(), g.values(), ops, p);
}

bool dual_feasible(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2, int n, const ModelParams& p, double slack) {
  if (q1.cwiseAbs().maxCoeff() > p.alpha1 + slack) return false;
  return cell_norms(q2, n).maxCoeff() <= p.lambda + slack;
}

double dual_energy(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2, const Eigen::VectorXd& g,
                   const OperatorSet& ops, const ModelParams& p) {
  const int n = ops.cells();
  if (q1.size() != n || q2.size() != ops.grad.rows() || g.size() != n)
    throw std::invalid_argument("dual_energy: dimension mismatch");
  if (!dual_feasible(q1, q2, n, p)) return kInfeasible;
  const Eigen::VectorXd w = ops.T_adj * q1 + ops.grad_adj * q2 - p.alpha2 * (ops.T_adj * g);
  const Eigen::VectorXd bw = ops.B_inv->apply(w);
  double d = -0.5 * (ops.w_u.array() * w.array() * bw.array()).sum();
  d += (ops.w_data.array() * (0.5 * p.alpha2 * g.array().square() - g.array() * q1.array())).sum();
  if (p.alpha1 > 0) d -= p.gamma1 / (2 * p.alpha1) * (ops.w_data.array() * q1.array().square()).sum();
  if (p.lambda > 0) d -= p.gamma2 / (2 * p.lambda) * (ops.w_grad.array() * q2.array().square()).sum();
  return d;
}

double dual_energy(const GridFunction& q1, const GridFunction& q2, const GridFunction& g, const OperatorSet& ops,
                   const ModelParams& p) {
  return dual_energy(q1.values(), q2.values(), g.values(), ops, p);
}

double residual(const SolverState& s, const GridFunction& g, const OperatorSet& ops, const ModelParams& p) {
  const Eigen::VectorXd& u = s.u.values();
  const Eigen::VectorXd& p1 = s.p1.values();
  const Eigen::VectorXd& p2 = s.p2.values();
  const int n = ops.cells();
  const Eigen::VectorXd r = ops.T * u - g.values();
  const Eigen::VectorXd gu = ops.grad * u;
  const MChi mc = weights_m_chi(u, g.values(), ops, p);

  const Eigen::VectorXd f1 =
      ops.T_adj * p1 + ops.grad_adj * p2 - p.alpha2 * (ops.T_adj * g.values()) + ops.B * u;
  double total = (ops.w_u.array() * f1.array().square()).sum();
  if (p.alpha1 > 0) {
    const Eigen::ArrayXd f2 = mc.m1.array() * p1.array() - p.alpha1 * r.array();
    total += (ops.w_data.array() * f2.square()).sum();
  }
  if (p.lambda > 0) {
    const Eigen::Index blocks = p2.size() / n;
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const Eigen::ArrayXd f3 = mc.m2.array() * p2.segment(b * n, n).array() - p.lambda * gu.segment(b * n, n).array();
      total += (ops.w_data.array() * f3.square()).sum();
    }
  }
  return std::sqrt(total);
}

void project_duals_inplace(Eigen::VectorXd& p1, Eigen::VectorXd& p2, int n, const ModelParams& p) {
  for (Eigen::Index i = 0; i < p1.size(); ++i) {
    const double a = std::abs(p1[i]);
    if (a > p.alpha1) p1[i] = p.alpha1 == 0.0 ? 0.0 : p1[i] * (p.alpha1 / a);
  }
  const Eigen::VectorXd norms = cell_norms(p2, n);
  const Eigen::Index blocks = p2.size() / n;
  for (int i = 0; i < n; ++i) {
    if (norms[i] <= p.lambda) continue;
    const double s = p.lambda == 0.0 ? 0.0 : p.lambda / norms[i];
    for (Eigen::Index b = 0; b < blocks; ++b) p2[b * n + i] *= s;
  }
}

SolverState project_duals(SolverState s, const ModelParams& p) {
  project_duals_inplace(s.p1.values(), s.p2.values(), s.u.cells(), p);
  return s;
}

}  // namespace quadtv
