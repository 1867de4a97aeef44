#include "quadtv/operators.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "quadtv/errors.hpp"

namespace quadtv {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_derivative_row(const QuadMesh& mesh, int i, Axis axis, Side side, double scale, int row_off, int col_off,
                        Triplets& t) {
  const double sign = side == Side::Forward ? 1.0 : -1.0;
  const double h = mesh.cell(i).h;
  const NeighborList& nb = mesh.neighbors(i, facing(axis, side));
  auto put = [&](int col, double v) { t.emplace_back(row_off + i, col_off + col, scale * v); };

  switch (mesh.classify(i, axis, side)) {
    case NodeClass::BoundaryNeumann:
      return;
    case NodeClass::BoundaryDirichlet:
      put(i, 1.0 / h);  // ghost value 0
      return;
    case NodeClass::Regular:
      put(nb.ids[0], sign / h);
      put(i, -sign / h);
      return;
    case NodeClass::Dangling1: {
      const double d = 0.75 * h;
      put(nb.ids[0], 0.5 * sign / d);
      put(nb.ids[1], 0.5 * sign / d);
      put(i, -sign / d);
      return;
    }
    case NodeClass::Dangling2:
    case NodeClass::Dangling3: {
      const double d = 3.0 * h;
      put(nb.ids[0], 2.0 * sign / d);
      put(mesh.companion(i, axis, side), -sign / d);
      put(i, -sign / d);
      return;
    }
  }
}

SpMat from_triplets(int rows, int cols, const Triplets& t) {
  SpMat a(rows, cols);
  a.setFromTriplets(t.begin(), t.end());
  a.prune(0.0);
  return a;
}

}  // namespace

SpMat assemble_derivative(const QuadMesh& mesh, Axis axis, Side side) {
  if (mesh.max_adjacent_level_jump() > 1) throw std::invalid_argument("assemble_derivative: mesh is not balanced");
  const int n = mesh.size();
  Triplets t;
  t.reserve(static_cast<std::size_t>(3 * n));
  for (int i = 0; i < n; ++i) add_derivative_row(mesh, i, axis, side, 1.0, 0, 0, t);
  return from_triplets(n, n, t);
}

SpMat assemble_centered(const QuadMesh& mesh, Axis axis) {
  SpMat c = 0.5 * (assemble_derivative(mesh, axis, Side::Forward) + assemble_derivative(mesh, axis, Side::Backward));
  c.prune(0.0);
  return c;
}

SpMat assemble_gradient(const QuadMesh& mesh, int channels) {
  if (mesh.max_adjacent_level_jump() > 1) throw std::invalid_argument("assemble_gradient: mesh is not balanced");
  const int n = mesh.size();
  Triplets t;
  t.reserve(static_cast<std::size_t>(6 * n * channels));
  for (int c = 0; c < channels; ++c)
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < n; ++i)
        add_derivative_row(mesh, i, k == 0 ? Axis::X : Axis::Y, Side::Forward, 1.0, (2 * c + k) * n, c * n, t);
  return from_triplets(2 * channels * n, channels * n, t);
}

SpMat assemble_divergence(const QuadMesh& mesh, int channels) {
  if (mesh.max_adjacent_level_jump() > 1) throw std::invalid_argument("assemble_divergence: mesh is not balanced");
  const int n = mesh.size();
  Triplets t;
  t.reserve(static_cast<std::size_t>(6 * n * channels));
  for (int c = 0; c < channels; ++c) {
    for (int k = 0; k < 2; ++k) {
      Triplets rows;
      const Axis axis = k == 0 ? Axis::X : Axis::Y;
      for (int i = 0; i < n; ++i) add_derivative_row(mesh, i, axis, Side::Backward, 1.0, 0, 0, rows);
      for (const auto& e : rows) {
        // The dual component of a cell without forward neighbour is zero
        // (Neumann gradient row), so it drops out of the divergence.
        if (e.col() == e.row() && mesh.neighbors(e.row(), facing(axis, Side::Forward)).count == 0) continue;
        t.emplace_back(c * n + e.row(), (2 * c + k) * n + e.col(), e.value());
      }
    }
  }
  return from_triplets(channels * n, 2 * channels * n, t);
}

SpMat adjoint(const SpMat& a, const Eigen::VectorXd& win, const Eigen::VectorXd& wout) {
  if (win.size() != a.cols() || wout.size() != a.rows()) throw std::invalid_argument("adjoint: weight size mismatch");
  SpMat at = SpMat(a.transpose());
  for (int k = 0; k < at.outerSize(); ++k)
    for (SpMat::InnerIterator it(at, k); it; ++it) it.valueRef() *= wout[it.col()] / win[it.row()];
  return at;
}

SpMat assemble_T(Problem kind, const QuadMesh& mesh, const GridFunction* f1) {
  const int n = mesh.size();
  if (kind == Problem::Denoise) {
    SpMat id(n, n);
    id.setIdentity();
    return id;
  }
  if (f1 == nullptr) throw std::invalid_argument("assemble_T: optical flow needs the image f1");
  if (f1->cells() != n || f1->channels() != 1) throw std::invalid_argument("assemble_T: f1 does not live on the mesh");
  const Eigen::VectorXd fx = assemble_centered(mesh, Axis::X) * f1->values();
  const Eigen::VectorXd fy = assemble_centered(mesh, Axis::Y) * f1->values();
  Triplets t;
  t.reserve(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, fx[i]);
    t.emplace_back(i, n + i, fy[i]);
  }
  return from_triplets(n, 2 * n, t);
}

BInverse::BInverse(const SpMat& weighted_b, Eigen::VectorXd weights, double alpha2, double beta)
    : weights_(std::move(weights)), weighted_b_(weighted_b) {
  if (try_factor(weighted_b_, true)) return;
  SpMat ridged = weighted_b_;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) ridged.coeffRef(i, i) += kRidge * weights_[i];
  ridge_ = true;
  if (!try_factor(ridged, false)) throw SingularOperatorError("B is singular even after ridge regularization", alpha2, beta);
  weighted_b_ = ridged;
}

bool BInverse::try_factor(const SpMat& m, bool strict) {
  ldlt_.compute(m);
  if (ldlt_.info() != Eigen::Success) return false;
  // A semidefinite B factors with a pivot at round-off level; treat it as singular.
  const Eigen::VectorXd d = ldlt_.vectorD();
  if (!d.allFinite() || d.minCoeff() <= 0.0) return false;
  if (strict && d.minCoeff() <= 1e-12 * d.maxCoeff()) return false;
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(m.rows());
  const Eigen::VectorXd x = ldlt_.solve(b);
  if (ldlt_.info() != Eigen::Success || !x.allFinite()) return false;
  // Backward error test: a tiny ridge leaves a large but accurate solution.
  double scale = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  return (m * x - b).norm() <= 1e-10 * (scale * x.norm() + b.norm());
}

Eigen::VectorXd BInverse::apply(const Eigen::VectorXd& b) const {
  return ldlt_.solve((weights_.array() * b.array()).matrix());
}

OperatorSet make_operators(const MeshPtr& mesh, SpMat T, int channels, Regularizer s_kind, double alpha2,
                           double beta) {
  OperatorSet ops;
  ops.mesh = mesh;
  ops.channels = channels;
  ops.s_kind = s_kind;
  const int n = mesh->size();
  if (T.rows() != n || T.cols() != channels * n) throw std::invalid_argument("make_operators: T has the wrong shape");

  ops.w_u = mass_weights(*mesh, channels);
  ops.w_data = mass_weights(*mesh, 1);
  ops.w_grad = mass_weights(*mesh, 2 * channels);
  ops.T = std::move(T);
  ops.T_adj = adjoint(ops.T, ops.w_u, ops.w_data);
  ops.grad = assemble_gradient(*mesh, channels);
  ops.grad_adj = adjoint(ops.grad, ops.w_u, ops.w_grad);

  Eigen::VectorXd w_s;
  if (s_kind == Regularizer::Identity) {
    ops.S.resize(channels * n, channels * n);
    ops.S.setIdentity();
    w_s = ops.w_u;
  } else {
    ops.S = ops.grad;
    w_s = ops.w_grad;
  }
  ops.S_adj = adjoint(ops.S, ops.w_u, w_s);

  // W B = alpha2 T^T W_d T + beta S^T W_s S, symmetric by construction.
  SpMat wb = alpha2 * SpMat(ops.T.transpose() * ops.w_data.asDiagonal() * ops.T) +
             beta * SpMat(ops.S.transpose() * w_s.asDiagonal() * ops.S);
  ops.B = ops.w_u.cwiseInverse().asDiagonal() * wb;
  ops.B_inv = std::make_shared<const BInverse>(wb, ops.w_u, alpha2, beta);
  return ops;
}

void write_matrix_market(const SpMat& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace quadtv
