#pragma once

#include <stdexcept>
#include <string>

namespace quadtv {

class SingularOperatorError : public std::runtime_error {
 public:
  SingularOperatorError(const std::string& what, double alpha2, double beta)
      : std::runtime_error(what), alpha2_(alpha2), beta_(beta) {}
  [[nodiscard]] double alpha2() const { return alpha2_; }
  [[nodiscard]] double beta() const { return beta_; }

 private:
  double alpha2_;
  double beta_;
};

class LinearSolveError : public std::runtime_error {
 public:
  LinearSolveError(const std::string& what, int iteration, double relative_residual)
      : std::runtime_error(what), iteration_(iteration), relative_residual_(relative_residual) {}
  [[nodiscard]] int iteration() const { return iteration_; }
  [[nodiscard]] double relative_residual() const { return relative_residual_; }

 private:
  int iteration_;
  double relative_residual_;
};

}  // namespace quadtv
