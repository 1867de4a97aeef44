#pragma once

#include <string>
#include <utility>
#include <vector>

#include "quadtv/model.hpp"
#include "quadtv/operators.hpp"

namespace quadtv {

struct NewtonReport {
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::vector<double> residual_log;         // one entry per iteration
  std::vector<double> linear_residual_log;  // ||H du - G|| / ||G|| per iteration
  bool converged = false;
  bool hit_max_it = false;
  std::string linear_solver;
  double linear_tolerance = 1e-10;

  void write_csv(const std::string& path) const;
};

/// Block operator whose every block row is [D(v_1) ... D(v_2m)], so that
/// (N(v) w) replicates the per-cell dot product v . w into each block.
SpMat assemble_N(const Eigen::VectorXd& v, int n);

std::pair<SpMat, Eigen::VectorXd> assemble_H_G(const SolverState& s, const GridFunction& g, const OperatorSet& ops,
                                               const ModelParams& p);

struct StepReport {
  double du_norm = 0.0;
  double linear_residual = 0.0;
};

SolverState newton_step(const SolverState& s, const GridFunction& g, const OperatorSet& ops, const ModelParams& p,
                        StepReport* report = nullptr);

/// u = T*g, p1 = T u, p2 = grad u, projected onto the dual constraints.
SolverState initial_state(const GridFunction& g, const OperatorSet& ops, const ModelParams& p);

std::pair<SolverState, NewtonReport> solve(const SolverState& initial, const GridFunction& g, const OperatorSet& ops,
                                           const ModelParams& p);
std::pair<SolverState, NewtonReport> solve(const GridFunction& g, const OperatorSet& ops, const ModelParams& p);

}  // namespace quadtv
