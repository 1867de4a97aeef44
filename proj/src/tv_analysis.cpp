#include "quadtv/tv_analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "quadtv/operators.hpp"

namespace quadtv {

Eigen::VectorXd gradient_norms(const GridFunction& u, double r) {
  if (!(r >= 1.0)) throw std::invalid_argument("gradient_norms: r must be at least 1");
  const int n = u.cells();
  const Eigen::VectorXd gu = assemble_gradient(u.mesh(), u.channels()) * u.values();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index b = 0; b < gu.size() / n; ++b) s += gu.segment(b * n, n).cwiseAbs().array().pow(r).matrix();
  return s.array().pow(1.0 / r).matrix();
}

double discrete_tv(const GridFunction& u, double r) {
  return mass_weights(u.mesh()).dot(gradient_norms(u, r));
}

double weighted_tv(const GridFunction& u, const Eigen::VectorXd& mu, double r) {
  if (mu.size() != u.cells()) throw std::invalid_argument("weighted_tv: weight count does not match mesh");
  return (mass_weights(u.mesh()).array() * mu.array() * gradient_norms(u, r).array()).sum();
}

bool is_one_step_refinement(const QuadMesh& coarse, const QuadMesh& fine) {
  if (!coarse.same_roots(fine)) return false;
  std::vector<double> covered(static_cast<std::size_t>(coarse.size()), 0.0);
  for (int j = 0; j < fine.size(); ++j) {
    const Cell& c = fine.cell(j);
    const int i = coarse.containing_leaf(c.level, c.ix, c.iy);
    if (i < 0) return false;
    const int jump = c.level - coarse.cell(i).level;
    if (jump != 0 && jump != 1) return false;
    covered[static_cast<std::size_t>(i)] += c.h * c.h;
  }
  for (int i = 0; i < coarse.size(); ++i) {
    const double h = coarse.cell(i).h;
    if (std::abs(covered[static_cast<std::size_t>(i)] - h * h) > 1e-12 * h * h) return false;
  }
  return true;
}

Eigen::VectorXd compute_mu(const GridFunction& u, const MeshPtr& fine, double r) {
  const QuadMesh& coarse = u.mesh();
  if (!is_one_step_refinement(coarse, *fine))
    throw std::invalid_argument("compute_mu: fine mesh is not a one-step refinement of the coarse mesh");
  const Eigen::VectorXd num = gradient_norms(u, r);
  const GridFunction fine_norms(fine, 1, gradient_norms(project_fine(u, fine), r));
  const GridFunction den = project_coarse(fine_norms, u.mesh_ptr());
  Eigen::VectorXd mu_coarse(coarse.size());
  for (int i = 0; i < coarse.size(); ++i) mu_coarse[i] = den(0, i) != 0.0 ? num[i] / den(0, i) : 1.0;
  return project_fine(GridFunction(u.mesh_ptr(), 1, mu_coarse), fine).values();
}

CompensationReport verify_compensation(const GridFunction& u, const MeshPtr& fine, double r) {
  CompensationReport rep;
  rep.mu = compute_mu(u, fine, r);
  const GridFunction pu = project_fine(u, fine);
  rep.tv_coarse = discrete_tv(u, r);
  rep.tv_fine = discrete_tv(pu, r);
  rep.tv_fine_weighted = weighted_tv(pu, rep.mu, r);
  rep.defect = std::abs(rep.tv_coarse - rep.tv_fine_weighted);
  rep.holds = rep.defect <= 1e-10 * (1.0 + rep.tv_coarse);
  rep.mu_min = rep.mu.minCoeff();
  rep.mu_max = rep.mu.maxCoeff();
  rep.mu_mean = rep.mu.mean();
  return rep;
}

}  // namespace quadtv
