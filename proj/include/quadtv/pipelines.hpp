#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadtv/estimator.hpp"
#include "quadtv/image_io.hpp"
#include "quadtv/newton.hpp"

namespace quadtv {

enum class MarkingMode { Dorfler, Fraction };

struct PipelineConfig {
  ModelParams model;
  Regularizer s_kind = Regularizer::Identity;
  double theta = 0.6;
  int max_ref = 6;
  double eps_warp = 5e-2;
  double sigma = 0.0;
  MarkingMode marking = MarkingMode::Dorfler;
  double fraction = 0.75;
  std::uint64_t seed = 1;
  int max_warps = 40;  // cap on solves in one warping run

  void validate() const;
};

PipelineConfig denoise_defaults();
PipelineConfig flow_defaults();
PipelineConfig disk_defaults();

struct LevelReport {
  int refinements = 0;  // refinements applied before this solve
  int dofs = 0;
  NewtonReport newton;
  double gap = 0.0;  // sum of the unshifted indicator
  int marked = 0;
  double warp_residual = 0.0;
  double seconds = 0.0;
};

// Denoising

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed);

struct DenoiseResult {
  GridFunction u;
  Image image;
  std::vector<MeshPtr> meshes;
  std::vector<std::vector<int>> marked;  // per refinement, ids on meshes[k]
  std::vector<LevelReport> levels;
};

DenoiseResult denoise_uniform(const Image& img, const PipelineConfig& cfg);
DenoiseResult denoise_adaptive(const Image& img, const PipelineConfig& cfg);

// Optical flow

/// Bilinear sample of f1 at x + flow(x); samples outside the image keep f1(x).
Image warp_image(const Image& f1, const FlowField& flow);

/// Piecewise-constant flow on the pixel grid covering the mesh domain.
FlowField to_pixels(const GridFunction& flow, int width, int height);

struct FlowResult {
  GridFunction flow;
  FlowField field;
  std::vector<MeshPtr> meshes;
  std::vector<std::vector<int>> marked;
  std::vector<LevelReport> steps;  // one per Newton solve
  int warps = 0;
};

/// Warping on the pixel mesh. With `warping` false only the first
/// linearization is solved.
FlowResult optflow_warping(const Image& f0, const Image& f1, const PipelineConfig& cfg, bool warping = true);

/// Coarse-to-fine warping with refinement whenever warping stalls.
FlowResult optflow_adaptive(const Image& f0, const Image& f1, const PipelineConfig& cfg);

// Disk benchmark on [-2, 2]^2 with f = 1_B(0, R)

/// c such that the exact minimizer is c 1_B. Needs alpha2 > 0.
double disk_exact_coefficient(double radius, double alpha1, double alpha2);
double disk_exact_value(double x, double y, double radius, double alpha1, double alpha2);

GridFunction disk_data(const MeshPtr& mesh, double radius);

/// || c 1_B - I_h u ||_{L2}, with the disk area in each cell resolved by
/// recursive subdivision of the cells the circle crosses.
double disk_l2_error(const GridFunction& u, double radius, double coefficient);

struct ConvergenceRow {
  std::string method;
  int level = 0;
  int dofs = 0;
  double error = 0.0;
  double seconds = 0.0;
  int newton_iterations = 0;
  bool converged = false;
};

struct DiskBenchmark {
  double coefficient = 0.0;
  std::vector<ConvergenceRow> uniform;
  std::vector<ConvergenceRow> adaptive;
  std::vector<MeshPtr> adaptive_meshes;
  std::vector<std::vector<int>> adaptive_marked;
};

/// Uniform solves on n x n grids for each n in `resolutions`; adaptive run
/// from a `coarse` x `coarse` grid with cfg.max_ref refinements (skipped when
/// max_ref < 0).
DiskBenchmark disk_benchmark(const PipelineConfig& cfg, double radius, const std::vector<int>& resolutions,
                             int coarse = 16);

void write_convergence_csv(const DiskBenchmark& b, const std::string& path);

}  // namespace quadtv
