#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

namespace quadtv {

/// Axis-aligned rectangle in physical coordinates. The y axis points "south"
/// (downwards, as image rows do), so the north neighbour of a cell has the
/// smaller y coordinate.
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 1.0;
  double height = 1.0;
};

enum class Direction { North = 0, East = 1, South = 2, West = 3 };
enum class Axis { X, Y };
enum class Side { Forward, Backward };

/// Stencil class of a (cell, axis, side) triple.
///  Regular:   facing neighbour has the same size.
///  Dangling1: two half-size neighbours face the cell.
///  Dangling2: facing neighbour is twice as large and the companion fine cell
///             (the sibling sharing that neighbour) lies to the north (x) or
///             east (y) of the cell.
///  Dangling3: as Dangling2 with the companion to the south (x) or west (y).
///  Boundary*: no neighbour; forward stencils are Neumann, backward Dirichlet.
enum class NodeClass { Regular, Dangling1, Dangling2, Dangling3, BoundaryNeumann, BoundaryDirichlet };

const char* to_string(NodeClass c);

/// Neighbour direction used by the stencil for (axis, side).
Direction facing(Axis axis, Side side);

/// Leaf cell of the quad-tree. (ix, iy) index the cell on the uniform lattice
/// of its level, which has nx * 2^level by ny * 2^level cells.
struct Cell {
  double cx = 0.0;
  double cy = 0.0;
  double h = 0.0;
  int level = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;
};

/// Edge neighbours of a leaf on one side: 0 (boundary), 1 (same size or
/// coarser) or 2 (finer, ordered west-to-east / north-to-south).
struct NeighborList {
  std::array<int, 2> ids{-1, -1};
  int count = 0;

  [[nodiscard]] std::span<const int> view() const { return {ids.data(), static_cast<std::size_t>(count)}; }
};

/// Balanced (2:1) quad-tree over a rectangle tiled by nx x ny square roots.
///
/// Leaves are numbered in a deterministic traversal: roots row-major, then
/// depth-first with children ordered NW, NE, SW, SE. Every operator matrix in
/// the library is expressed in this numbering.
///
/// A QuadMesh is immutable; refine() returns a new mesh.
class QuadMesh {
 public:
  static QuadMesh uniform(int nx, int ny, Rect domain);

  [[nodiscard]] const Rect& domain() const { return domain_; }
  [[nodiscard]] int roots_x() const { return nx_; }
  [[nodiscard]] int roots_y() const { return ny_; }
  [[nodiscard]] double root_size() const { return root_h_; }

  [[nodiscard]] int size() const { return static_cast<int>(cells_.size()); }
  [[nodiscard]] const Cell& cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }
  [[nodiscard]] const NeighborList& neighbors(int i, Direction d) const {
    return adjacency_[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  }
  [[nodiscard]] int max_level() const;

  [[nodiscard]] NodeClass classify(int cell, Axis axis, Side side) const;

  /// Same-size sibling used by the Dangling2/Dangling3 stencils, -1 otherwise.
  [[nodiscard]] int companion(int cell, Axis axis, Side side) const;

  /// Leaf id at (level, ix, iy) or -1 when that node is not a leaf.
  [[nodiscard]] int find_leaf(int level, std::int64_t ix, std::int64_t iy) const;

  /// Leaf of this mesh that contains the node (level, ix, iy), or -1 when the
  /// node is subdivided further here.
  [[nodiscard]] int containing_leaf(int level, std::int64_t ix, std::int64_t iy) const;

  /// Splits every marked leaf into four children, then refines further until
  /// no two edge-adjacent leaves differ by more than one level.
  [[nodiscard]] QuadMesh refine(std::span<const int> marked) const;

  /// Uniform refinement of every leaf.
  [[nodiscard]] QuadMesh refine_all() const;

  /// Cells split by the last refine() call that produced this mesh, in the
  /// parent mesh numbering (marked plus balancing cascade).
  [[nodiscard]] const std::vector<int>& split_parents() const { return split_parents_; }

  [[nodiscard]] bool same_roots(const QuadMesh& other) const;

  /// Largest level difference over all edge-adjacent leaf pairs.
  [[nodiscard]] int max_adjacent_level_jump() const;

  [[nodiscard]] double total_area() const;

  void write_csv(const std::string& path) const;
  void write_svg(const std::string& path, double pixels_per_unit = 0.0) const;

 private:
  static std::uint64_t pack(int level, std::int64_t ix, std::int64_t iy);

  QuadMesh(Rect domain, int nx, int ny);
  void build(const std::unordered_set<std::uint64_t>& leaves);
  [[nodiscard]] bool inside(int level, std::int64_t ix, std::int64_t iy) const;
  [[nodiscard]] Cell make_cell(int level, std::int64_t ix, std::int64_t iy) const;

  Rect domain_;
  int nx_ = 1;
  int ny_ = 1;
  double root_h_ = 1.0;
  std::vector<Cell> cells_;
  std::vector<std::array<NeighborList, 4>> adjacency_;
  std::unordered_map<std::uint64_t, int> leaf_index_;
  std::vector<int> split_parents_;
};

using MeshPtr = std::shared_ptr<const QuadMesh>;

inline MeshPtr make_mesh(QuadMesh mesh) { return std::make_shared<const QuadMesh>(std::move(mesh)); }

/// Per-cell values of an m-channel function, stored channel-major:
/// value of channel k at cell i lives at k * N + i.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(MeshPtr mesh, int channels);
  GridFunction(MeshPtr mesh, int channels, Eigen::VectorXd values);

  static GridFunction constant(MeshPtr mesh, int channels, double value);

  [[nodiscard]] const MeshPtr& mesh_ptr() const { return mesh_; }
  [[nodiscard]] const QuadMesh& mesh() const { return *mesh_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] int cells() const { return mesh_->size(); }

  [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  [[nodiscard]] double operator()(int channel, int cell) const {
    return values_[static_cast<Eigen::Index>(channel) * cells() + cell];
  }
  double& operator()(int channel, int cell) { return values_[static_cast<Eigen::Index>(channel) * cells() + cell]; }

  /// Mesh-weighted inner product sum_i h_i^2 sum_k v_ki w_ki.
  [[nodiscard]] double dot(const GridFunction& other) const;
  [[nodiscard]] double norm() const;
  /// sum_i h_i^2 v_ki for one channel.
  [[nodiscard]] double integral(int channel = 0) const;

 private:
  MeshPtr mesh_;
  int channels_ = 1;
  Eigen::VectorXd values_;
};

/// Square quadrature weights h_i^2, repeated for `blocks` consecutive blocks.
Eigen::VectorXd mass_weights(const QuadMesh& mesh, int blocks = 1);

/// (pi u): every fine leaf takes the value of the coarse leaf containing it.
GridFunction project_fine(const GridFunction& coarse, const MeshPtr& fine_mesh);

/// (pi~ u): every coarse leaf takes the mean of the fine leaves it contains
/// (area weighted, which is the plain mean for a one-step refinement).
GridFunction project_coarse(const GridFunction& fine, const MeshPtr& coarse_mesh);

/// Row-major grayscale raster; pixel (x, y) covers [x, x+1) x [y, y+1) in
/// raster coordinates.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  [[nodiscard]] double at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  double& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  [[nodiscard]] std::size_t size() const { return pixels.size(); }
};

/// L2 projection of a raster onto piecewise constants: each cell gets the
/// area-weighted mean of the pixels it overlaps. The raster is stretched over
/// the mesh domain; pixels must be square and cell edges must lie on pixel
/// edges unless the cell sits inside a single pixel.
GridFunction sample_image(const Image& image, const MeshPtr& mesh);

/// Cell averages of an analytic function, using midpoint quadrature on a
/// recursive subdivision of cells where `cut` reports a discontinuity.
GridFunction sample_function(const std::function<double(double, double)>& f, const MeshPtr& mesh,
                             const std::function<bool(double, double, double)>& cut = {}, int max_depth = 6);

/// Piecewise-constant rendering of a scalar grid function onto a raster whose
/// pixels align with the mesh domain.
Image render(const GridFunction& u, int channel, int width, int height);

}  // namespace quadtv
