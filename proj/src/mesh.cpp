#include "quadtv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace quadtv {

namespace {

constexpr int kLevelBits = 6;
constexpr int kCoordBits = 29;

struct Node {
  int level;
  std::int64_t ix;
  std::int64_t iy;
};

constexpr std::array<std::array<int, 2>, 4> kStep{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

}  // namespace

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Regular: return "regular";
    case NodeClass::Dangling1: return "dangling1";
    case NodeClass::Dangling2: return "dangling2";
    case NodeClass::Dangling3: return "dangling3";
    case NodeClass::BoundaryNeumann: return "boundary-neumann";
    case NodeClass::BoundaryDirichlet: return "boundary-dirichlet";
  }
  return "?";
}

Direction facing(Axis axis, Side side) {
  if (axis == Axis::X) return side == Side::Forward ? Direction::East : Direction::West;
  return side == Side::Forward ? Direction::South : Direction::North;
}

std::uint64_t QuadMesh::pack(int level, std::int64_t ix, std::int64_t iy) {
  return (static_cast<std::uint64_t>(level) << (2 * kCoordBits)) | (static_cast<std::uint64_t>(ix) << kCoordBits) |
         static_cast<std::uint64_t>(iy);
}

QuadMesh::QuadMesh(Rect domain, int nx, int ny) : domain_(domain), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("mesh: cell counts must be positive");
  if (!(domain.width > 0.0) || !(domain.height > 0.0)) throw std::invalid_argument("mesh: empty domain");
  root_h_ = domain.width / nx;
  const double hy = domain.height / ny;
  if (std::abs(root_h_ - hy) > 1e-12 * std::max(root_h_, hy))
    throw std::invalid_argument("mesh: domain and cell counts do not give square cells");
}

QuadMesh QuadMesh::uniform(int nx, int ny, Rect domain) {
  QuadMesh mesh(domain, nx, ny);
  std::unordered_set<std::uint64_t> leaves;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) leaves.insert(pack(0, i, j));
  mesh.build(leaves);
  return mesh;
}

bool QuadMesh::inside(int level, std::int64_t ix, std::int64_t iy) const {
  return ix >= 0 && iy >= 0 && ix < (std::int64_t{nx_} << level) && iy < (std::int64_t{ny_} << level);
}

Cell QuadMesh::make_cell(int level, std::int64_t ix, std::int64_t iy) const {
  Cell c;
  c.level = level;
  c.ix = ix;
  c.iy = iy;
  c.h = std::ldexp(root_h_, -level);
  c.cx = domain_.x0 + (static_cast<double>(ix) + 0.5) * c.h;
  c.cy = domain_.y0 + (static_cast<double>(iy) + 0.5) * c.h;
  return c;
}

void QuadMesh::build(const std::unordered_set<std::uint64_t>& leaves) {
  cells_.clear();
  leaf_index_.clear();
  cells_.reserve(leaves.size());
  leaf_index_.reserve(leaves.size());

  // Depth-first traversal, children NW, NE, SW, SE.
  std::vector<Node> stack;
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      stack.push_back({0, i, j});
      while (!stack.empty()) {
        const Node n = stack.back();
        stack.pop_back();
        if (leaves.count(pack(n.level, n.ix, n.iy))) {
          leaf_index_.emplace(pack(n.level, n.ix, n.iy), static_cast<int>(cells_.size()));
          cells_.push_back(make_cell(n.level, n.ix, n.iy));
          continue;
        }
        if (n.level + 1 >= (1 << kLevelBits)) throw std::runtime_error("mesh: leaf set does not tile the domain");
        const int l = n.level + 1;
        stack.push_back({l, 2 * n.ix + 1, 2 * n.iy + 1});
        stack.push_back({l, 2 * n.ix, 2 * n.iy + 1});
        stack.push_back({l, 2 * n.ix + 1, 2 * n.iy});
        stack.push_back({l, 2 * n.ix, 2 * n.iy});
      }
    }
  }
  if (cells_.size() != leaves.size()) throw std::runtime_error("mesh: overlapping leaves");

  adjacency_.assign(cells_.size(), {});
  for (std::size_t id = 0; id < cells_.size(); ++id) {
    const Cell& c = cells_[id];
    for (int d = 0; d < 4; ++d) {
      NeighborList& nb = adjacency_[id][static_cast<std::size_t>(d)];
      const std::int64_t ax = c.ix + kStep[static_cast<std::size_t>(d)][0];
      const std::int64_t ay = c.iy + kStep[static_cast<std::size_t>(d)][1];
      if (!inside(c.level, ax, ay)) continue;
      if (int same = find_leaf(c.level, ax, ay); same >= 0) {
        nb.ids[0] = same;
        nb.count = 1;
        continue;
      }
      if (c.level > 0) {
        if (int coarse = find_leaf(c.level - 1, ax >> 1, ay >> 1); coarse >= 0) {
          nb.ids[0] = coarse;
          nb.count = 1;
          continue;
        }
      }
      // Two finer cells along the shared edge.
      std::array<std::array<std::int64_t, 2>, 2> fine{};
      switch (static_cast<Direction>(d)) {
        case Direction::North: fine = {{{2 * ax, 2 * ay + 1}, {2 * ax + 1, 2 * ay + 1}}}; break;
        case Direction::South: fine = {{{2 * ax, 2 * ay}, {2 * ax + 1, 2 * ay}}}; break;
        case Direction::East: fine = {{{2 * ax, 2 * ay}, {2 * ax, 2 * ay + 1}}}; break;
        case Direction::West: fine = {{{2 * ax + 1, 2 * ay}, {2 * ax + 1, 2 * ay + 1}}}; break;
      }
      for (const auto& f : fine) {
        const int id_f = find_leaf(c.level + 1, f[0], f[1]);
        if (id_f < 0) throw std::runtime_error("mesh: leaf set violates 2:1 balance");
        nb.ids[static_cast<std::size_t>(nb.count++)] = id_f;
      }
    }
  }
}

int QuadMesh::find_leaf(int level, std::int64_t ix, std::int64_t iy) const {
  if (level < 0 || !inside(level, ix, iy)) return -1;
  auto it = leaf_index_.find(pack(level, ix, iy));
  return it == leaf_index_.end() ? -1 : it->second;
}

int QuadMesh::containing_leaf(int level, std::int64_t ix, std::int64_t iy) const {
  for (int l = level; l >= 0; --l) {
    const int s = level - l;
    if (int id = find_leaf(l, ix >> s, iy >> s); id >= 0) return id;
  }
  return -1;
}

int QuadMesh::max_level() const {
  int m = 0;
  for (const Cell& c : cells_) m = std::max(m, c.level);
  return m;
}

NodeClass QuadMesh::classify(int cell, Axis axis, Side side) const {
  const NeighborList& nb = neighbors(cell, facing(axis, side));
  if (nb.count == 0) return side == Side::Forward ? NodeClass::BoundaryNeumann : NodeClass::BoundaryDirichlet;
  if (nb.count == 2) return NodeClass::Dangling1;
  const Cell& c = this->cell(cell);
  if (this->cell(nb.ids[0]).level == c.level) return NodeClass::Regular;
  // Coarser neighbour: the companion sits on the other half of the shared edge.
  const bool second_half = axis == Axis::X ? (c.iy & 1) != 0 : (c.ix & 1) == 0;
  return second_half ? NodeClass::Dangling2 : NodeClass::Dangling3;
}

int QuadMesh::companion(int cell, Axis axis, Side side) const {
  const NodeClass k = classify(cell, axis, side);
  Direction d;
  if (k == NodeClass::Dangling2)
    d = axis == Axis::X ? Direction::North : Direction::East;
  else if (k == NodeClass::Dangling3)
    d = axis == Axis::X ? Direction::South : Direction::West;
  else
    return -1;
  const NeighborList& nb = neighbors(cell, d);
  if (nb.count != 1 || this->cell(nb.ids[0]).level != this->cell(cell).level)
    throw std::runtime_error("mesh: dangling companion is not a same-size leaf");
  return nb.ids[0];
}

QuadMesh QuadMesh::refine(std::span<const int> marked) const {
  std::unordered_set<std::uint64_t> leaves;
  leaves.reserve(cells_.size() + 4 * marked.size());
  for (const Cell& c : cells_) leaves.insert(pack(c.level, c.ix, c.iy));

  std::vector<char> split(cells_.size(), 0);
  std::deque<Node> queue;
  auto split_node = [&](const Node& n) {
    leaves.erase(pack(n.level, n.ix, n.iy));
    if (int id = find_leaf(n.level, n.ix, n.iy); id >= 0) split[static_cast<std::size_t>(id)] = 1;
    for (int k = 0; k < 4; ++k) {
      const Node ch{n.level + 1, 2 * n.ix + (k & 1), 2 * n.iy + (k >> 1)};
      leaves.insert(pack(ch.level, ch.ix, ch.iy));
      queue.push_back(ch);
    }
  };

  for (int id : marked) {
    if (id < 0 || id >= size()) throw std::invalid_argument("refine: marked id is not a leaf");
    if (split[static_cast<std::size_t>(id)]) continue;
    const Cell& c = cells_[static_cast<std::size_t>(id)];
    split_node({c.level, c.ix, c.iy});
  }

  while (!queue.empty()) {
    const Node n = queue.front();
    queue.pop_front();
    if (!leaves.count(pack(n.level, n.ix, n.iy))) continue;
    for (const auto& st : kStep) {
      const std::int64_t ax = n.ix + st[0];
      const std::int64_t ay = n.iy + st[1];
      if (!inside(n.level, ax, ay)) continue;
      for (int l = n.level - 2; l >= 0; --l) {
        const int s = n.level - l;
        if (leaves.count(pack(l, ax >> s, ay >> s))) {
          split_node({l, ax >> s, ay >> s});
          queue.push_back(n);
          break;
        }
      }
    }
  }

  QuadMesh out(domain_, nx_, ny_);
  out.build(leaves);
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i]) out.split_parents_.push_back(static_cast<int>(i));
  return out;
}

QuadMesh QuadMesh::refine_all() const {
  std::vector<int> all(cells_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return refine(all);
}

bool QuadMesh::same_roots(const QuadMesh& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && domain_.x0 == other.domain_.x0 && domain_.y0 == other.domain_.y0 &&
         domain_.width == other.domain_.width && domain_.height == other.domain_.height;
}

int QuadMesh::max_adjacent_level_jump() const {
  int jump = 0;
  for (int i = 0; i < size(); ++i)
    for (int d = 0; d < 4; ++d)
      for (int j : neighbors(i, static_cast<Direction>(d)).view())
        jump = std::max(jump, std::abs(cell(i).level - cell(j).level));
  return jump;
}

double QuadMesh::total_area() const {
  double a = 0.0;
  for (const Cell& c : cells_) a += c.h * c.h;
  return a;
}

void QuadMesh::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "id,cx,cy,h,level\n";
  for (int i = 0; i < size(); ++i) {
    const Cell& c = cell(i);
    out << i << ',' << c.cx << ',' << c.cy << ',' << c.h << ',' << c.level << '\n';
  }
}

void QuadMesh::write_svg(const std::string& path, double pixels_per_unit) const {
  if (pixels_per_unit <= 0.0) pixels_per_unit = 512.0 / std::max(domain_.width, domain_.height);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const double w = domain_.width * pixels_per_unit;
  const double h = domain_.height * pixels_per_unit;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<g fill=\"none\" stroke=\"black\" stroke-width=\"0.5\">\n";
  for (const Cell& c : cells_) {
    out << "<rect x=\"" << (c.cx - c.h / 2 - domain_.x0) * pixels_per_unit << "\" y=\""
        << (c.cy - c.h / 2 - domain_.y0) * pixels_per_unit << "\" width=\"" << c.h * pixels_per_unit
        << "\" height=\"" << c.h * pixels_per_unit << "\"/>\n";
  }
  out << "</g>\n</svg>\n";
}

// GridFunction

GridFunction::GridFunction(MeshPtr mesh, int channels)
    : GridFunction(mesh, channels, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels) * mesh->size())) {}

GridFunction::GridFunction(MeshPtr mesh, int channels, Eigen::VectorXd values)
    : mesh_(std::move(mesh)), channels_(channels), values_(std::move(values)) {
  if (!mesh_) throw std::invalid_argument("grid function: null mesh");
  if (channels_ < 1) throw std::invalid_argument("grid function: channel count must be positive");
  if (values_.size() != static_cast<Eigen::Index>(channels_) * mesh_->size())
    throw std::invalid_argument("grid function: value count does not match mesh");
}

GridFunction GridFunction::constant(MeshPtr mesh, int channels, double value) {
  const auto n = static_cast<Eigen::Index>(channels) * mesh->size();
  return {std::move(mesh), channels, Eigen::VectorXd::Constant(n, value)};
}

double GridFunction::dot(const GridFunction& other) const {
  if (other.mesh_ != mesh_ && !(other.mesh().size() == mesh().size()))
    throw std::invalid_argument("grid function: mesh mismatch");
  if (other.channels_ != channels_) throw std::invalid_argument("grid function: channel mismatch");
  const Eigen::VectorXd w = mass_weights(*mesh_, channels_);
  return (w.array() * values_.array() * other.values_.array()).sum();
}

double GridFunction::norm() const { return std::sqrt(dot(*this)); }

double GridFunction::integral(int channel) const {
  double s = 0.0;
  for (int i = 0; i < cells(); ++i) s += mesh_->cell(i).h * mesh_->cell(i).h * (*this)(channel, i);
  return s;
}

Eigen::VectorXd mass_weights(const QuadMesh& mesh, int blocks) {
  const int n = mesh.size();
  Eigen::VectorXd w(static_cast<Eigen::Index>(blocks) * n);
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < n; ++i) w[static_cast<Eigen::Index>(b) * n + i] = mesh.cell(i).h * mesh.cell(i).h;
  return w;
}

GridFunction project_fine(const GridFunction& coarse, const MeshPtr& fine_mesh) {
  const QuadMesh& cm = coarse.mesh();
  if (!cm.same_roots(*fine_mesh)) throw std::invalid_argument("project_fine: meshes have different roots");
  GridFunction out(fine_mesh, coarse.channels());
  for (int j = 0; j < fine_mesh->size(); ++j) {
    const Cell& c = fine_mesh->cell(j);
    const int i = cm.containing_leaf(c.level, c.ix, c.iy);
    if (i < 0) throw std::invalid_argument("project_fine: target mesh is not a refinement");
    for (int k = 0; k < coarse.channels(); ++k) out(k, j) = coarse(k, i);
  }
  return out;
}

GridFunction project_coarse(const GridFunction& fine, const MeshPtr& coarse_mesh) {
  const QuadMesh& fm = fine.mesh();
  if (!fm.same_roots(*coarse_mesh)) throw std::invalid_argument("project_coarse: meshes have different roots");
  GridFunction out(coarse_mesh, fine.channels());
  std::vector<double> area(static_cast<std::size_t>(coarse_mesh->size()), 0.0);
  for (int j = 0; j < fm.size(); ++j) {
    const Cell& c = fm.cell(j);
    const int i = coarse_mesh->containing_leaf(c.level, c.ix, c.iy);
    if (i < 0) throw std::invalid_argument("project_coarse: source mesh is not a refinement");
    const double a = c.h * c.h;
    area[static_cast<std::size_t>(i)] += a;
    for (int k = 0; k < fine.channels(); ++k) out(k, i) += a * fine(k, j);
  }
  for (int i = 0; i < coarse_mesh->size(); ++i) {
    const double a = area[static_cast<std::size_t>(i)];
    const double h = coarse_mesh->cell(i).h;
    if (std::abs(a - h * h) > 1e-9 * h * h) throw std::invalid_argument("project_coarse: source mesh is not a refinement");
    for (int k = 0; k < fine.channels(); ++k) out(k, i) /= a;
  }
  return out;
}

GridFunction sample_image(const Image& image, const MeshPtr& mesh) {
  if (image.width < 1 || image.height < 1) throw std::invalid_argument("sample_image: empty raster");
  const Rect& d = mesh->domain();
  const double px = d.width / image.width;
  const double py = d.height / image.height;
  if (std::abs(px - py) > 1e-12 * std::max(px, py))
    throw std::invalid_argument("sample_image: raster extent does not match the domain");
  GridFunction out(mesh, 1);
  constexpr double tol = 1e-9;
  for (int i = 0; i < mesh->size(); ++i) {
    const Cell& c = mesh->cell(i);
    const double a0 = (c.cx - c.h / 2 - d.x0) / px;
    const double a1 = (c.cx + c.h / 2 - d.x0) / px;
    const double b0 = (c.cy - c.h / 2 - d.y0) / px;
    const double b1 = (c.cy + c.h / 2 - d.y0) / px;
    const auto x0 = static_cast<int>(std::floor(a0 + tol));
    const auto y0 = static_cast<int>(std::floor(b0 + tol));
    const bool single = a1 - x0 <= 1 + tol && b1 - y0 <= 1 + tol;
    auto on_edge = [](double v) { return std::abs(v - std::round(v)) <= tol; };
    if (!single && !(on_edge(a0) && on_edge(a1) && on_edge(b0) && on_edge(b1)))
      throw std::invalid_argument("sample_image: cell edges do not align with pixel edges");
    if (single) {
      out(0, i) = image.at(std::min(x0, image.width - 1), std::min(y0, image.height - 1));
      continue;
    }
    const auto x1 = static_cast<int>(std::lround(a1));
    const auto y1 = static_cast<int>(std::lround(b1));
    double s = 0.0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) s += image.at(x, y);
    out(0, i) = s / (static_cast<double>(x1 - x0) * (y1 - y0));
  }
  return out;
}

namespace {

double cell_average(const std::function<double(double, double)>& f,
                    const std::function<bool(double, double, double)>& cut, double cx, double cy, double h,
                    int depth) {
  if (depth <= 0 || !cut || !cut(cx, cy, h)) return f(cx, cy);
  const double q = h / 4;
  return 0.25 * (cell_average(f, cut, cx - q, cy - q, h / 2, depth - 1) +
                 cell_average(f, cut, cx + q, cy - q, h / 2, depth - 1) +
                 cell_average(f, cut, cx - q, cy + q, h / 2, depth - 1) +
                 cell_average(f, cut, cx + q, cy + q, h / 2, depth - 1));
}

}  // namespace

GridFunction sample_function(const std::function<double(double, double)>& f, const MeshPtr& mesh,
                             const std::function<bool(double, double, double)>& cut, int max_depth) {
  GridFunction out(mesh, 1);
  for (int i = 0; i < mesh->size(); ++i) {
    const Cell& c = mesh->cell(i);
    out(0, i) = cell_average(f, cut, c.cx, c.cy, c.h, max_depth);
  }
  return out;
}

Image render(const GridFunction& u, int channel, int width, int height) {
  const QuadMesh& m = u.mesh();
  const Rect& d = m.domain();
  const int lmax = m.max_level();
  const double hf = std::ldexp(m.root_size(), -lmax);
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = d.x0 + (x + 0.5) * d.width / width;
      const double py = d.y0 + (y + 0.5) * d.height / height;
      const auto ix = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((px - d.x0) / hf)), 0,
                                               (std::int64_t{m.roots_x()} << lmax) - 1);
      const auto iy = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((py - d.y0) / hf)), 0,
                                               (std::int64_t{m.roots_y()} << lmax) - 1);
      img.at(x, y) = u(channel, m.containing_leaf(lmax, ix, iy));
    }
  }
  return img;
}

}  // namespace quadtv
