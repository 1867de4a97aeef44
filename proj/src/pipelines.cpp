#include "quadtv/pipelines.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

namespace quadtv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> all_cells(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

double image_distance(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
  return std::sqrt(s);
}

MeshPtr coarse_grid(int width, int height, int refinements, const char* who) {
  if (refinements < 0) throw std::invalid_argument(std::string(who) + ": negative refinement count");
  const int step = 1 << refinements;
  if (width % step != 0 || height % step != 0)
    throw std::invalid_argument(std::string(who) + ": image size must be divisible by 2^max_ref");
  return make_mesh(QuadMesh::uniform(width / step, height / step, {0.0, 0.0, double(width), double(height)}));
}

// Solve, estimate, mark and refine until cfg.max_ref refinements are done,
// then solve once more on the final mesh.
struct AdaptiveRun {
  SolverState state;
  GridFunction g;
  std::vector<MeshPtr> meshes;
  std::vector<std::vector<int>> marked;
  std::vector<LevelReport> levels;
};

using SolveHook = std::function<void(int, const SolverState&)>;

AdaptiveRun run_adaptive(MeshPtr mesh, const std::function<GridFunction(const MeshPtr&)>& data,
                         const PipelineConfig& cfg, const SolveHook& on_solve = {}) {
  const ModelParams& p = cfg.model;
  AdaptiveRun run;
  for (int k = 0;; ++k) {
    const auto t0 = Clock::now();
    run.meshes.push_back(mesh);
    GridFunction g = data(mesh);
    const OperatorSet ops =
        make_operators(mesh, assemble_T(Problem::Denoise, *mesh), 1, cfg.s_kind, p.alpha2, p.beta);
    auto [state, rep] = solve(g, ops, p);
    if (on_solve) on_solve(k, state);
    LevelReport lr;
    lr.refinements = k;
    lr.dofs = mesh->size();
    lr.newton = rep;

    bool done = k >= cfg.max_ref;
    if (!done) {
      const IndicatorField eta = local_indicator(state, g, ops, p);
      lr.gap = eta.raw.sum();
      const std::vector<int> candidates = cfg.sigma > 0 ? bulk_filter(state.u, g, cfg.sigma) : all_cells(mesh->size());
      std::vector<int> marked = cfg.marking == MarkingMode::Fraction
                                    ? fraction_mark(eta.shifted, cfg.fraction)
                                    : dorfler_mark(eta.shifted, cfg.theta, candidates);
      lr.marked = static_cast<int>(marked.size());
      if (marked.empty()) {
        done = true;
      } else {
        mesh = make_mesh(mesh->refine(marked));
        run.marked.push_back(std::move(marked));
      }
    }
    lr.seconds = seconds_since(t0);
    run.levels.push_back(std::move(lr));
    if (done) {
      run.state = std::move(state);
      run.g = std::move(g);
      return run;
    }
  }
}

}  // namespace

void PipelineConfig::validate() const {
  model.validate();
  if (theta < 0 || theta > 1) throw std::invalid_argument("theta must lie in [0, 1]");
  if (fraction < 0 || fraction > 1) throw std::invalid_argument("fraction must lie in [0, 1]");
  if (max_ref < 0) throw std::invalid_argument("max_ref must be non-negative");
  if (!(eps_warp > 0)) throw std::invalid_argument("eps_warp must be positive");
  if (sigma < 0) throw std::invalid_argument("sigma must be non-negative");
  if (max_warps < 1) throw std::invalid_argument("max_warps must be positive");
}

PipelineConfig denoise_defaults() {
  PipelineConfig c;
  c.model = {0.0, 10.0, 1.0, 0.0, 2e-4, 2e-4, 2, 1e-3, 100};
  c.s_kind = Regularizer::Identity;
  c.theta = 0.6;
  c.max_ref = 6;
  return c;
}

PipelineConfig flow_defaults() {
  PipelineConfig c;
  c.model = {3.0, 0.0, 1.0, 1e-5, 2e-4, 2e-4, 2, 1e-3, 100};
  c.s_kind = Regularizer::Gradient;
  c.eps_warp = 5e-2;
  c.marking = MarkingMode::Fraction;
  c.fraction = 0.75;
  c.max_ref = 3;
  return c;
}

PipelineConfig disk_defaults() {
  PipelineConfig c;
  c.model = {1.0, 1.0, 1.0, 0.0, 2e-4, 2e-4, 2, 1e-3, 100};
  c.s_kind = Regularizer::Identity;
  c.theta = 0.2;
  c.max_ref = 5;
  return c;
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise level must be non-negative");
  Image out = img;
  if (sigma == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.pixels) v += noise(rng);
  return out;
}

DenoiseResult denoise_uniform(const Image& img, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineConfig c = cfg;
  c.max_ref = 0;
  const MeshPtr mesh = coarse_grid(img.width, img.height, 0, "denoise_uniform");
  AdaptiveRun run = run_adaptive(mesh, [&](const MeshPtr& m) { return sample_image(img, m); }, c);
  DenoiseResult r{run.state.u, render(run.state.u, 0, img.width, img.height), run.meshes, run.marked, run.levels};
  return r;
}

DenoiseResult denoise_adaptive(const Image& img, const PipelineConfig& cfg) {
  cfg.validate();
  const MeshPtr mesh = coarse_grid(img.width, img.height, cfg.max_ref, "denoise_adaptive");
  AdaptiveRun run = run_adaptive(mesh, [&](const MeshPtr& m) { return sample_image(img, m); }, cfg);
  DenoiseResult r{run.state.u, render(run.state.u, 0, img.width, img.height), run.meshes, run.marked, run.levels};
  return r;
}

Image warp_image(const Image& f1, const FlowField& flow) {
  if (flow.width != f1.width || flow.height != f1.height) throw std::invalid_argument("warp_image: size mismatch");
  Image out(f1.width, f1.height);
  const double xmax = f1.width - 1;
  const double ymax = f1.height - 1;
  for (int y = 0; y < f1.height; ++y) {
    for (int x = 0; x < f1.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(f1.width) + static_cast<std::size_t>(x);
      const double sx = x + flow.u[i];
      const double sy = y + flow.v[i];
      if (!(sx >= 0 && sx <= xmax && sy >= 0 && sy <= ymax)) {
        out.pixels[i] = f1.pixels[i];
        continue;
      }
      const int x0 = std::min(static_cast<int>(std::floor(sx)), f1.width - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), f1.height - 1);
      const int x1 = std::min(x0 + 1, f1.width - 1);
      const int y1 = std::min(y0 + 1, f1.height - 1);
      const double ax = sx - x0;
      const double ay = sy - y0;
      out.pixels[i] = (1 - ay) * ((1 - ax) * f1.at(x0, y0) + ax * f1.at(x1, y0)) +
                      ay * ((1 - ax) * f1.at(x0, y1) + ax * f1.at(x1, y1));
    }
  }
  return out;
}

FlowField to_pixels(const GridFunction& flow, int width, int height) {
  if (flow.channels() != 2) throw std::invalid_argument("to_pixels: flow needs two channels");
  FlowField f(width, height);
  f.u = render(flow, 0, width, height).pixels;
  f.v = render(flow, 1, width, height).pixels;
  return f;
}

namespace {

struct WarpSolve {
  SolverState state;
  GridFunction g;
  OperatorSet ops;
  NewtonReport report;
};

WarpSolve solve_linearized(const Image& f0, const Image& fw, const GridFunction& u_k, const PipelineConfig& cfg) {
  const MeshPtr& mesh = u_k.mesh_ptr();
  const GridFunction f0m = sample_image(f0, mesh);
  const GridFunction fwm = sample_image(fw, mesh);
  SpMat T = assemble_T(Problem::OpticalFlow, *mesh, &fwm);
  GridFunction g(mesh, 1, T * u_k.values() - (fwm.values() - f0m.values()));
  OperatorSet ops = make_operators(mesh, std::move(T), 2, cfg.s_kind, cfg.model.alpha2, cfg.model.beta);
  auto [state, rep] = solve(g, ops, cfg.model);
  return {std::move(state), std::move(g), std::move(ops), std::move(rep)};
}

void check_frames(const Image& f0, const Image& f1) {
  if (f0.width != f1.width || f0.height != f1.height || f0.size() == 0)
    throw std::invalid_argument("optical flow: frames differ in size or are empty");
}

}  // namespace

FlowResult optflow_warping(const Image& f0, const Image& f1, const PipelineConfig& cfg, bool warping) {
  cfg.validate();
  check_frames(f0, f1);
  const MeshPtr mesh = coarse_grid(f0.width, f0.height, 0, "optflow_warping");
  FlowResult res;
  res.meshes.push_back(mesh);
  GridFunction u(mesh, 2);
  Image fw = f1;
  double prev = image_distance(fw, f0);
  while (true) {
    const auto t0 = Clock::now();
    WarpSolve ws = solve_linearized(f0, fw, u, cfg);
    u = ws.state.u;
    ++res.warps;
    fw = warp_image(f1, to_pixels(u, f0.width, f0.height));
    const double cur = image_distance(fw, f0);
    LevelReport lr;
    lr.dofs = mesh->size();
    lr.newton = std::move(ws.report);
    lr.warp_residual = cur;
    lr.seconds = seconds_since(t0);
    res.steps.push_back(std::move(lr));
    if (!warping || res.warps >= cfg.max_warps) break;
    if (prev <= 0.0 || (prev - cur) / prev <= cfg.eps_warp) break;
    prev = cur;
  }
  res.field = to_pixels(u, f0.width, f0.height);
  res.flow = std::move(u);
  return res;
}

FlowResult optflow_adaptive(const Image& f0, const Image& f1, const PipelineConfig& cfg) {
  cfg.validate();
  check_frames(f0, f1);
  MeshPtr mesh = coarse_grid(f0.width, f0.height, cfg.max_ref, "optflow_adaptive");
  FlowResult res;
  res.meshes.push_back(mesh);
  GridFunction u(mesh, 2);
  GridFunction solved = u;
  Image fw = f1;
  double prev = image_distance(fw, f0);
  int refinements = 0;
  while (refinements < cfg.max_ref && res.warps < cfg.max_warps) {
    const auto t0 = Clock::now();
    WarpSolve ws = solve_linearized(f0, fw, u, cfg);
    u = ws.state.u;
    solved = u;
    ++res.warps;
    fw = warp_image(f1, to_pixels(u, f0.width, f0.height));
    const double cur = image_distance(fw, f0);
    LevelReport lr;
    lr.refinements = refinements;
    lr.dofs = mesh->size();
    lr.warp_residual = cur;
    if (prev <= 0.0 || (prev - cur) / prev <= cfg.eps_warp) {
      const IndicatorField eta = local_indicator(ws.state, ws.g, ws.ops, cfg.model);
      lr.gap = eta.raw.sum();
      std::vector<int> marked = cfg.marking == MarkingMode::Fraction ? fraction_mark(eta.shifted, cfg.fraction)
                                                                     : dorfler_mark(eta.shifted, cfg.theta);
      lr.marked = static_cast<int>(marked.size());
      mesh = make_mesh(mesh->refine(marked));
      u = project_fine(u, mesh);
      res.meshes.push_back(mesh);
      res.marked.push_back(std::move(marked));
      ++refinements;
    }
    lr.newton = std::move(ws.report);
    lr.seconds = seconds_since(t0);
    res.steps.push_back(std::move(lr));
    prev = cur;
  }
  res.field = to_pixels(solved, f0.width, f0.height);
  res.flow = std::move(solved);
  return res;
}

double disk_exact_coefficient(double radius, double alpha1, double alpha2) {
  if (!(alpha2 > 0)) throw std::invalid_argument("disk benchmark: alpha2 must be positive");
  if (!(radius > 0) || alpha1 < 0) throw std::invalid_argument("disk benchmark: invalid radius or alpha1");
  if (radius < 2.0 / (alpha1 + alpha2)) return 0.0;
  if (alpha1 == 0.0 || radius <= 2.0 / alpha1) return (alpha2 + alpha1) / alpha2 - 2.0 / (alpha2 * radius);
  return 1.0;
}

double disk_exact_value(double x, double y, double radius, double alpha1, double alpha2) {
  const double c = disk_exact_coefficient(radius, alpha1, alpha2);
  return x * x + y * y < radius * radius ? c : 0.0;
}

namespace {

std::function<bool(double, double, double)> circle_cut(double radius) {
  return [radius](double cx, double cy, double h) {
    const double dx = std::max(std::abs(cx) - h / 2, 0.0);
    const double dy = std::max(std::abs(cy) - h / 2, 0.0);
    const double ex = std::abs(cx) + h / 2;
    const double ey = std::abs(cy) + h / 2;
    return dx * dx + dy * dy < radius * radius && ex * ex + ey * ey > radius * radius;
  };
}

GridFunction disk_fraction(const MeshPtr& mesh, double radius, int depth) {
  return sample_function([radius](double x, double y) { return x * x + y * y < radius * radius ? 1.0 : 0.0; }, mesh,
                         circle_cut(radius), depth);
}

MeshPtr disk_grid(int n) { return make_mesh(QuadMesh::uniform(n, n, {-2.0, -2.0, 4.0, 4.0})); }

}  // namespace

GridFunction disk_data(const MeshPtr& mesh, double radius) { return disk_fraction(mesh, radius, 8); }

double disk_l2_error(const GridFunction& u, double radius, double coefficient) {
  const GridFunction frac = disk_fraction(u.mesh_ptr(), radius, 12);
  double e = 0.0;
  for (int i = 0; i < u.cells(); ++i) {
    const double a = u.mesh().cell(i).h * u.mesh().cell(i).h;
    const double ui = u(0, i);
    e += a * (frac(0, i) * (coefficient - ui) * (coefficient - ui) + (1.0 - frac(0, i)) * ui * ui);
  }
  return std::sqrt(e);
}

DiskBenchmark disk_benchmark(const PipelineConfig& cfg, double radius, const std::vector<int>& resolutions,
                             int coarse) {
  cfg.model.validate();
  DiskBenchmark b;
  b.coefficient = disk_exact_coefficient(radius, cfg.model.alpha1, cfg.model.alpha2);
  auto data = [radius](const MeshPtr& m) { return disk_data(m, radius); };

  for (int n : resolutions) {
    const auto t0 = Clock::now();
    PipelineConfig c = cfg;
    c.max_ref = 0;
    AdaptiveRun run = run_adaptive(disk_grid(n), data, c);
    ConvergenceRow row{"uniform", 0, run.meshes.back()->size(), disk_l2_error(run.state.u, radius, b.coefficient),
                       seconds_since(t0), run.levels.back().newton.iterations, run.levels.back().newton.converged};
    b.uniform.push_back(row);
  }

  if (cfg.max_ref >= 0) {
    PipelineConfig c = cfg;
    c.sigma = 0.0;
    c.marking = MarkingMode::Dorfler;
    std::vector<double> errors;
    AdaptiveRun run = run_adaptive(disk_grid(coarse), data, c, [&](int, const SolverState& s) {
      errors.push_back(disk_l2_error(s.u, radius, b.coefficient));
    });
    for (std::size_t k = 0; k < run.levels.size(); ++k) {
      const LevelReport& lr = run.levels[k];
      b.adaptive.push_back({"adaptive", static_cast<int>(k), lr.dofs, errors[k], lr.seconds, lr.newton.iterations,
                            lr.newton.converged});
    }
    b.adaptive_meshes = std::move(run.meshes);
    b.adaptive_marked = std::move(run.marked);
  }
  return b;
}

void write_convergence_csv(const DiskBenchmark& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(12);
  out << "method,level,dofs,error,seconds,newton_iterations,converged,exact_inside,exact_outside\n";
  auto emit = [&](const ConvergenceRow& r) {
    out << r.method << ',' << r.level << ',' << r.dofs << ',' << r.error << ',' << r.seconds << ','
        << r.newton_iterations << ',' << (r.converged ? 1 : 0) << ',' << b.coefficient << ',' << 0.0 << '\n';
  };
  for (const auto& r : b.uniform) emit(r);
  for (const auto& r : b.adaptive) emit(r);
}

}  // namespace quadtv
