#pragma once

#include <vector>

#include "quadtv/mesh.hpp"

namespace quadtv {

/// Per-cell r-norm of the forward gradient of u (all channels).
Eigen::VectorXd gradient_norms(const GridFunction& u, double r);

double discrete_tv(const GridFunction& u, double r);
double weighted_tv(const GridFunction& u, const Eigen::VectorXd& mu, double r);

/// Weights on the fine mesh that make the weighted fine TV of the prolonged
/// function equal the coarse TV. `fine` must split each coarse leaf at most once.
Eigen::VectorXd compute_mu(const GridFunction& u, const MeshPtr& fine, double r);

struct CompensationReport {
  double tv_coarse = 0.0;
  double tv_fine = 0.0;           // unweighted TV of the prolonged function
  double tv_fine_weighted = 0.0;  // with the computed weights
  double defect = 0.0;
  bool holds = false;
  Eigen::VectorXd mu;
  double mu_min = 0.0;
  double mu_max = 0.0;
  double mu_mean = 0.0;
};

CompensationReport verify_compensation(const GridFunction& u, const MeshPtr& fine, double r);

/// True when every coarse leaf is either kept or split exactly once in `fine`.
bool is_one_step_refinement(const QuadMesh& coarse, const QuadMesh& fine);

}  // namespace quadtv
