#pragma once

#include <memory>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "quadtv/mesh.hpp"

namespace quadtv {

using SpMat = Eigen::SparseMatrix<double>;

/// One-sided or centred derivative along `axis`, N x N.
SpMat assemble_derivative(const QuadMesh& mesh, Axis axis, Side side);
SpMat assemble_centered(const QuadMesh& mesh, Axis axis);

/// Forward-difference gradient for m channels, 2mN x mN. Row 2nN + kN + i is
/// the k-th derivative (x then y) of channel n at cell i.
SpMat assemble_gradient(const QuadMesh& mesh, int channels);

/// Backward-difference divergence for m channels, mN x 2mN. Missing west/north
/// neighbours act as zero (Dirichlet); dual components of cells on the
/// east/south boundary are treated as zero.
SpMat assemble_divergence(const QuadMesh& mesh, int channels);

/// W_in^-1 A^T W_out: the adjoint of A : (R^n, W_in) -> (R^k, W_out).
SpMat adjoint(const SpMat& a, const Eigen::VectorXd& win, const Eigen::VectorXd& wout);

enum class Problem { Denoise, OpticalFlow };
enum class Regularizer { Identity, Gradient };

/// Data operator. Denoising: identity. Optical flow: the N x 2N pointwise map
/// u -> (d_x f1) u_x + (d_y f1) u_y with centred derivatives of f1.
SpMat assemble_T(Problem kind, const QuadMesh& mesh, const GridFunction* f1 = nullptr);

/// Factorized B = alpha2 T*T + beta S*S. B is self-adjoint in the weighted
/// inner product, so W B is symmetric and factorized by LDL^T.
class BInverse {
 public:
  BInverse(const SpMat& weighted_b, Eigen::VectorXd weights, double alpha2, double beta);

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& b) const;
  [[nodiscard]] bool ridge() const { return ridge_; }

  static constexpr double kRidge = 1e-10;

 private:
  bool try_factor(const SpMat& m, bool strict);

  Eigen::VectorXd weights_;
  SpMat weighted_b_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  bool ridge_ = false;
};

/// Everything a solve on one mesh needs.
struct OperatorSet {
  MeshPtr mesh;
  int channels = 1;
  Regularizer s_kind = Regularizer::Identity;

  Eigen::VectorXd w_u;     // mN
  Eigen::VectorXd w_data;  // N
  Eigen::VectorXd w_grad;  // 2mN

  SpMat T, T_adj;
  SpMat S, S_adj;
  SpMat grad, grad_adj;
  SpMat B;
  std::shared_ptr<const BInverse> B_inv;

  [[nodiscard]] int cells() const { return mesh->size(); }
};

OperatorSet make_operators(const MeshPtr& mesh, SpMat T, int channels, Regularizer s_kind, double alpha2,
                           double beta);

void write_matrix_market(const SpMat& a, const std::string& path);

}  // namespace quadtv
