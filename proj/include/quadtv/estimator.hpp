#pragma once

#include <span>
#include <string>
#include <vector>

#include "quadtv/model.hpp"

namespace quadtv {

struct IndicatorField {
  MeshPtr mesh;
  Eigen::VectorXd raw;      // eta, sums to the primal-dual gap
  Eigen::VectorXd shifted;  // eta - min(eta)
  double raw_min = 0.0;

  void write_csv(const std::string& path) const;
};

/// Per-cell primal-dual gap contributions of (v, q1, q2). Throws
/// std::invalid_argument for infeasible duals.
Eigen::VectorXd local_indicator_raw(const Eigen::VectorXd& v, const Eigen::VectorXd& q1, const Eigen::VectorXd& q2,
                                    const Eigen::VectorXd& g, const OperatorSet& ops, const ModelParams& p);

IndicatorField local_indicator(const SolverState& s, const GridFunction& g, const OperatorSet& ops,
                               const ModelParams& p);

/// Shortest prefix of the cells sorted by decreasing eta (ties by id) whose
/// sum reaches theta times the total. With `candidates`, only those cells take
/// part. Returned ids are sorted ascending.
std::vector<int> dorfler_mark(const Eigen::VectorXd& eta, double theta);
std::vector<int> dorfler_mark(const Eigen::VectorXd& eta, double theta, std::span<const int> candidates);

/// Cells with h^2 (u - g)^2 / 2 >= sigma^2 / 2 and u != g.
std::vector<int> bulk_filter(const GridFunction& u, const GridFunction& g, double sigma);

/// The ceil(fraction * N) cells with the largest eta (ties by id), ascending.
std::vector<int> fraction_mark(const Eigen::VectorXd& eta, double fraction);

}  // namespace quadtv
