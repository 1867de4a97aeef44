#include "quadtv/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace quadtv {

namespace {

std::vector<int> ranked(const Eigen::VectorXd& eta, std::vector<int> ids) {
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (eta[a] != eta[b]) return eta[a] > eta[b];
    return a < b;
  });
  return ids;
}

}  // namespace

void IndicatorField::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "id,cx,cy,h,eta,eta_shifted\n";
  for (int i = 0; i < mesh->size(); ++i) {
    const Cell& c = mesh->cell(i);
    out << i << ',' << c.cx << ',' << c.cy << ',' << c.h << ',' << raw[i] << ',' << shifted[i] << '\n';
  }
}

Eigen::VectorXd local_indicator_raw(const Eigen::VectorXd& v, const Eigen::VectorXd& q1, const Eigen::VectorXd& q2,
                                    const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p) {
  const int n = ops.cells();
  if (!dual_feasible(q1, q2, n, p)) throw std::invalid_argument("local_indicator: infeasible dual variables");
  const Eigen::VectorXd r = ops.T * v - g;
  const Eigen::VectorXd gv = ops.grad * v;
  const Eigen::VectorXd gn = cell_norms(gv, n);
  const Eigen::VectorXd w = ops.T_adj * q1 + ops.grad_adj * q2 - p.alpha2 * (ops.T_adj * g);
  const Eigen::VectorXd bw = ops.B_inv->apply(w);
  const Eigen::VectorXd sv = ops.s_kind == Regularizer::Identity ? v : gv;

  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) {
    double phi = 0.0;
    for (Eigen::Index b = 0; b < sv.size() / n; ++b) phi += sv[b * n + i] * sv[b * n + i];
    double wbw = 0.0;
    for (Eigen::Index b = 0; b < w.size() / n; ++b) wbw += w[b * n + i] * bw[b * n + i];
    double e = p.alpha1 * huber(r[i], p.gamma1) + 0.5 * p.alpha2 * r[i] * r[i] + 0.5 * p.beta * phi +
               p.lambda * huber(gn[i], p.gamma2) + 0.5 * wbw - 0.5 * p.alpha2 * g[i] * g[i] + g[i] * q1[i];
    if (p.alpha1 > 0) e += p.gamma1 / (2 * p.alpha1) * q1[i] * q1[i];
    if (p.lambda > 0) {
      double q2sq = 0.0;
      for (Eigen::Index b = 0; b < q2.size() / n; ++b) q2sq += q2[b * n + i] * q2[b * n + i];
      e += p.gamma2 / (2 * p.lambda) * q2sq;
    }
    eta[i] = ops.w_data[i] * e;
  }
  return eta;
}

IndicatorField local_indicator(const SolverState& s, const GridFunction& g, const OperatorSet& ops,
                               const ModelParams& p) {
  IndicatorField f;
  f.mesh = ops.mesh;
  f.raw = local_indicator_raw(s.u.values(), s.p1.values(), s.p2.values(), g.values(), ops, p);
  f.raw_min = f.raw.minCoeff();
  f.shifted = f.raw.array() - f.raw_min;
  return f;
}

std::vector<int> dorfler_mark(const Eigen::VectorXd& eta, double theta, std::span<const int> candidates) {
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("dorfler_mark: theta must lie in [0, 1]");
  std::vector<int> order = ranked(eta, {candidates.begin(), candidates.end()});
  double total = 0.0;
  for (int i : order) total += eta[i];
  std::vector<int> out;
  if (theta == 0.0) return out;
  const double target = theta * total;
  double acc = 0.0;
  for (int i : order) {
    if (acc >= target) break;
    out.push_back(i);
    acc += eta[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> dorfler_mark(const Eigen::VectorXd& eta, double theta) {
  std::vector<int> all(static_cast<std::size_t>(eta.size()));
  std::iota(all.begin(), all.end(), 0);
  return dorfler_mark(eta, theta, all);
}

std::vector<int> bulk_filter(const GridFunction& u, const GridFunction& g, double sigma) {
  if (u.cells() != g.cells() || u.channels() != g.channels()) throw std::invalid_argument("bulk_filter: mismatch");
  std::vector<int> out;
  const double threshold = 0.5 * sigma * sigma;
  for (int i = 0; i < u.cells(); ++i) {
    const double h = u.mesh().cell(i).h;
    double d2 = 0.0;
    for (int k = 0; k < u.channels(); ++k) d2 += (u(k, i) - g(k, i)) * (u(k, i) - g(k, i));
    const double v = 0.5 * h * h * d2;
    if (v > 0.0 && v >= threshold) out.push_back(i);
  }
  return out;
}

std::vector<int> fraction_mark(const Eigen::VectorXd& eta, double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("fraction_mark: fraction must lie in [0, 1]");
  std::vector<int> all(static_cast<std::size_t>(eta.size()));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> order = ranked(eta, std::move(all));
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(eta.size()) - 1e-9));
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace quadtv
