#pragma once

#include <limits>

#include <Eigen/Core>

#include "quadtv/mesh.hpp"
#include "quadtv/operators.hpp"

namespace quadtv {

struct ModelParams {
  double alpha1 = 0.0;
  double alpha2 = 10.0;
  double lambda = 1.0;
  double beta = 0.0;
  double gamma1 = 2e-4;
  double gamma2 = 2e-4;
  int r = 2;
  double eps = 1e-3;
  int max_it = 100;

  /// Throws std::invalid_argument on negative weights or r != 2.
  void validate() const;
};

struct SolverState {
  GridFunction u;   // m channels
  GridFunction p1;  // 1 channel
  GridFunction p2;  // 2m channels
};

inline constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

/// phi_gamma(x): x^2/(2 gamma) for |x| <= gamma, |x| - gamma/2 beyond; |x| for gamma = 0.
double huber(double x, double gamma);

/// Per-cell Euclidean norm over all blocks of a blocked vector of n cells.
Eigen::VectorXd cell_norms(const Eigen::VectorXd& w, int n);
double frob_r(const GridFunction& w, int cell);

/// m1 = max(gamma1, |Tu - g|), m2 = max(gamma2, |grad u|) and the active sets.
/// All four vectors have one entry per cell.
struct MChi {
  Eigen::VectorXd m1, chi1;
  Eigen::VectorXd m2, chi2;
};
MChi weights_m_chi(const Eigen::VectorXd& u, const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p);

double primal_energy(const Eigen::VectorXd& v, const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p);
double primal_energy(const GridFunction& v, const GridFunction& g, const OperatorSet& ops, const ModelParams& p);

/// Regularized dual energy; kInfeasible when the duals leave their balls.
double dual_energy(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2, const Eigen::VectorXd& g,
                   const OperatorSet& ops, const ModelParams& p);
double dual_energy(const GridFunction& q1, const GridFunction& q2, const GridFunction& g, const OperatorSet& ops,
                   const ModelParams& p);

bool dual_feasible(const Eigen::VectorXd& q1, const Eigen::VectorXd& q2, int n, const ModelParams& p,
                   double slack = 1e-12);

/// Norm of the optimality system: the three blocks
///   T*p1 + grad*p2 - alpha2 T*g + Bu,  m1 p1 - alpha1 (Tu - g),  m2 p2 - lambda grad u
/// are stacked and measured in the weighted norm. Blocks of switched-off
/// terms (alpha1 = 0 or lambda = 0) are omitted.
double residual(const SolverState& s, const GridFunction& g, const OperatorSet& ops, const ModelParams& p);

SolverState project_duals(SolverState s, const ModelParams& p);
void project_duals_inplace(Eigen::VectorXd& p1, Eigen::VectorXd& p2, int n, const ModelParams& p);

}  // namespace quadtv
