#include "quadtv/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "quadtv/image_io.hpp"
#include "quadtv/metrics.hpp"
#include "quadtv/pipelines.hpp"
#include "quadtv/tv_analysis.hpp"

namespace quadtv::cli {

namespace {

struct ModelFlags {
  std::optional<double> alpha1, alpha2, lambda, beta, gamma1, gamma2, eps;
  std::optional<int> max_it;

  void apply(ModelParams& p) const {
    if (alpha1) p.alpha1 = *alpha1;
    if (alpha2) p.alpha2 = *alpha2;
    if (lambda) p.lambda = *lambda;
    if (beta) p.beta = *beta;
    if (gamma1) p.gamma1 = *gamma1;
    if (gamma2) p.gamma2 = *gamma2;
    if (eps) p.eps = *eps;
    if (max_it) p.max_it = *max_it;
  }
};

void export_meshes(const std::vector<MeshPtr>& meshes, const std::string& prefix) {
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    const std::string base = prefix + "_" + std::to_string(k);
    meshes[k]->write_csv(base + ".csv");
    meshes[k]->write_svg(base + ".svg");
  }
}

void print_levels(const std::vector<LevelReport>& levels) {
  for (const LevelReport& l : levels) {
    std::cout << "solve refinements=" << l.refinements << " dofs=" << l.dofs << " newton_it=" << l.newton.iterations
              << " residual=" << l.newton.final_residual << (l.newton.converged ? "" : " (max_it reached)")
              << " marked=" << l.marked << '\n';
  }
}

// denoise

struct DenoiseArgs {
  std::string input, reference, out, mesh_out, metrics_out;
  double sigma = 0.0;
  bool add_noise = false;
  bool uniform = false;
  std::optional<double> theta;
  std::optional<int> max_ref;
};

int run_denoise(const DenoiseArgs& a, const ModelFlags& mf, std::uint64_t seed) {
  PipelineConfig cfg = denoise_defaults();
  mf.apply(cfg.model);
  cfg.sigma = a.sigma;
  cfg.seed = seed;
  if (a.theta) cfg.theta = *a.theta;
  if (a.max_ref) cfg.max_ref = *a.max_ref;

  const Image clean = read_image(a.input);
  const Image noisy = a.add_noise ? add_gaussian_noise(clean, a.sigma, seed) : clean;
  const DenoiseResult r = a.uniform ? denoise_uniform(noisy, cfg) : denoise_adaptive(noisy, cfg);
  print_levels(r.levels);

  const Image ref = a.reference.empty() ? clean : read_image(a.reference);
  const double p_in = psnr(noisy, ref);
  const double p_out = psnr(r.image, ref);
  const double s_out = mssim(r.image, ref);
  std::cout << "dofs=" << r.u.cells() << " psnr_input=" << p_in << " psnr=" << p_out << " mssim=" << s_out << '\n';

  if (!a.out.empty()) write_image(r.image, a.out);
  if (!a.mesh_out.empty()) export_meshes(r.meshes, a.mesh_out);
  if (!a.metrics_out.empty()) {
    std::ofstream m(a.metrics_out);
    if (!m) throw std::runtime_error("cannot write " + a.metrics_out);
    m.precision(10);
    m << "metric,value\n"
      << "dofs," << r.u.cells() << "\npsnr_input," << p_in << "\npsnr," << p_out << "\nmssim," << s_out
      << "\nssim_window," << kSsimWindow << "\nnewton_iterations," << r.levels.back().newton.iterations << '\n';
  }
  return 0;
}

// optflow

struct FlowArgs {
  std::string f0, f1, gt, warping = "uniform", flo_out, color_out, metrics_out, mesh_out;
  std::optional<double> eps_warp, fraction;
  std::optional<int> max_ref;
};

int run_optflow(const FlowArgs& a, const ModelFlags& mf) {
  PipelineConfig cfg = flow_defaults();
  mf.apply(cfg.model);
  if (a.eps_warp) cfg.eps_warp = *a.eps_warp;
  if (a.fraction) cfg.fraction = *a.fraction;
  if (a.max_ref) cfg.max_ref = *a.max_ref;

  const Image f0 = read_image(a.f0);
  const Image f1 = read_image(a.f1);
  FlowResult r;
  if (a.warping == "adaptive")
    r = optflow_adaptive(f0, f1, cfg);
  else
    r = optflow_warping(f0, f1, cfg, a.warping == "uniform");
  print_levels(r.steps);
  std::cout << "dofs=" << r.flow.cells() << " warps=" << r.warps << '\n';

  std::optional<double> max_mag;
  std::ostringstream metrics;
  metrics.precision(10);
  metrics << "metric,value\ndofs," << r.flow.cells() << "\nwarps," << r.warps << '\n';
  if (!a.gt.empty()) {
    const FlowField gt = read_flo(a.gt);
    const FlowError ee = endpoint_error(r.field, gt);
    const FlowError ae = angular_error(r.field, gt);
    std::cout << "ee_mean=" << ee.mean << " ee_std=" << ee.stddev << " ae_mean=" << ae.mean << " ae_std=" << ae.stddev
              << '\n';
    metrics << "ee_mean," << ee.mean << "\nee_std," << ee.stddev << "\nae_mean," << ae.mean << "\nae_std," << ae.stddev
            << '\n';
    double m = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (gt.known(i)) m = std::max(m, std::hypot(gt.u[i], gt.v[i]));
    if (m > 0) max_mag = m;
  }
  if (!a.flo_out.empty()) write_flo(r.field, a.flo_out);
  if (!a.color_out.empty()) write_rgb(flow_to_color(r.field, max_mag), a.color_out);
  if (!a.mesh_out.empty()) export_meshes(r.meshes, a.mesh_out);
  if (!a.metrics_out.empty()) {
    std::ofstream m(a.metrics_out);
    if (!m) throw std::runtime_error("cannot write " + a.metrics_out);
    m << metrics.str();
  }
  return 0;
}

// disk-bench

struct DiskArgs {
  double radius = 1.5;
  std::vector<double> alphas{1.0, 1.0};
  int levels = 5;
  std::vector<int> resolutions{16, 32, 64};
  int coarse = 16;
  std::optional<double> theta;
  std::string csv_out;
};

int run_disk(const DiskArgs& a, ModelFlags mf) {
  if (a.alphas.size() != 2) throw CLI::ValidationError("--alphas", "expects two values alpha1,alpha2");
  PipelineConfig cfg = disk_defaults();
  cfg.model.alpha1 = a.alphas[0];
  cfg.model.alpha2 = a.alphas[1];
  mf.alpha1.reset();
  mf.alpha2.reset();
  mf.apply(cfg.model);
  if (a.theta) cfg.theta = *a.theta;
  cfg.max_ref = a.levels;
  const DiskBenchmark b = disk_benchmark(cfg, a.radius, a.resolutions, a.coarse);
  std::cout << "exact solution: " << b.coefficient << " inside B(0," << a.radius << "), 0 outside\n";
  for (const auto* rows : {&b.uniform, &b.adaptive})
    for (const ConvergenceRow& r : *rows)
      std::cout << r.method << " level=" << r.level << " dofs=" << r.dofs << " error=" << r.error
                << " newton_it=" << r.newton_iterations << " time=" << r.seconds << "s\n";
  if (!a.csv_out.empty()) write_convergence_csv(b, a.csv_out);
  return 0;
}

// tv-analyze

struct TvArgs {
  std::string input, csv_out, refine = "uniform";
  double r = 2.0;
  int bins = 20;
};

int run_tv(const TvArgs& a) {
  const Image img = read_image(a.input);
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(img.width, img.height, {0, 0, double(img.width), double(img.height)}));
  const GridFunction u = sample_image(img, coarse);
  MeshPtr fine;
  if (a.refine == "uniform") {
    fine = make_mesh(coarse->refine_all());
  } else {
    const Eigen::VectorXd gn = gradient_norms(u, a.r);
    std::vector<int> marked;
    for (int i = 0; i < coarse->size(); ++i)
      if (gn[i] > 0) marked.push_back(i);
    fine = make_mesh(coarse->refine(marked));
    if (!is_one_step_refinement(*coarse, *fine))
      throw std::runtime_error("balancing produced a multi-level refinement; use --refine-once uniform");
  }
  const CompensationReport rep = verify_compensation(u, fine, a.r);
  std::cout.precision(12);
  std::cout << "tv_coarse=" << rep.tv_coarse << " tv_fine=" << rep.tv_fine << " tv_fine_weighted=" << rep.tv_fine_weighted
            << " mu_min=" << rep.mu_min << " mu_max=" << rep.mu_max << " mu_mean=" << rep.mu_mean
            << " compensated=" << (rep.holds ? "yes" : "no") << '\n';
  if (!a.csv_out.empty()) {
    std::ofstream out(a.csv_out);
    if (!out) throw std::runtime_error("cannot write " + a.csv_out);
    out.precision(12);
    out << "# tv_coarse=" << rep.tv_coarse << " tv_fine=" << rep.tv_fine << " tv_fine_weighted=" << rep.tv_fine_weighted
        << '\n';
    out << "bin,lo,hi,count\n";
    const double lo = rep.mu_min;
    const double width = (rep.mu_max - lo) / a.bins;
    std::vector<int> counts(static_cast<std::size_t>(a.bins), 0);
    for (Eigen::Index i = 0; i < rep.mu.size(); ++i) {
      int b = width > 0 ? static_cast<int>((rep.mu[i] - lo) / width) : 0;
      counts[static_cast<std::size_t>(std::clamp(b, 0, a.bins - 1))]++;
    }
    for (int b = 0; b < a.bins; ++b)
      out << b << ',' << lo + b * width << ',' << lo + (b + 1) * width << ',' << counts[static_cast<std::size_t>(b)]
          << '\n';
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Adaptive L1-L2-TV denoising and optical flow on quad-tree grids", "quadtv"};
  app.set_config("--config", "", "key = value file with default option values");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  int threads = 1;
  ModelFlags mf;
  app.add_option("--seed", seed, "seed for synthetic noise")->capture_default_str();
  app.add_option("--threads", threads, "threads for linear algebra")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--alpha1", mf.alpha1, "L1 data weight")->check(CLI::NonNegativeNumber);
  app.add_option("--alpha2", mf.alpha2, "L2 data weight")->check(CLI::NonNegativeNumber);
  app.add_option("--lambda", mf.lambda, "TV weight")->check(CLI::NonNegativeNumber);
  app.add_option("--beta", mf.beta, "weight of the S term")->check(CLI::NonNegativeNumber);
  app.add_option("--gamma1", mf.gamma1, "Huber parameter of the L1 term")->check(CLI::NonNegativeNumber);
  app.add_option("--gamma2", mf.gamma2, "Huber parameter of the TV term")->check(CLI::NonNegativeNumber);
  app.add_option("--eps", mf.eps, "Newton residual tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-it", mf.max_it, "Newton iteration limit")->check(CLI::PositiveNumber);

  DenoiseArgs da;
  auto* den = app.add_subcommand("denoise", "denoise a grayscale image");
  den->add_option("--input", da.input, "input image (.pgm or .png)")->required()->check(CLI::ExistingFile);
  den->add_option("--reference", da.reference, "clean image for PSNR/MSSIM (defaults to --input)")
      ->check(CLI::ExistingFile);
  den->add_option("--sigma", da.sigma, "noise level for the bulk criterion")->check(CLI::NonNegativeNumber);
  den->add_flag("--add-noise", da.add_noise, "add Gaussian noise of level sigma to the input first");
  auto* uni = den->add_flag("--uniform", da.uniform, "solve on the pixel grid");
  den->add_flag("--adaptive", "adaptive refinement (default)")->excludes(uni);
  den->add_option("--theta", da.theta, "Dorfler fraction")->check(CLI::Range(0.0, 1.0));
  den->add_option("--max-ref", da.max_ref, "number of refinements")->check(CLI::NonNegativeNumber);
  den->add_option("--out", da.out, "output image");
  den->add_option("--mesh-out", da.mesh_out, "prefix for numbered mesh CSV/SVG files");
  den->add_option("--metrics-out", da.metrics_out, "metrics CSV");

  FlowArgs fa;
  auto* of = app.add_subcommand("optflow", "estimate optical flow between two frames");
  of->add_option("--f0", fa.f0, "first frame")->required()->check(CLI::ExistingFile);
  of->add_option("--f1", fa.f1, "second frame")->required()->check(CLI::ExistingFile);
  of->add_option("--gt", fa.gt, "ground truth .flo")->check(CLI::ExistingFile);
  of->add_option("--warping", fa.warping, "none, uniform or adaptive")
      ->check(CLI::IsMember({"none", "uniform", "adaptive"}))
      ->capture_default_str();
  of->add_option("--eps-warp", fa.eps_warp, "warping stopping threshold")->check(CLI::PositiveNumber);
  of->add_option("--fraction", fa.fraction, "fraction of cells refined per level")->check(CLI::Range(0.0, 1.0));
  of->add_option("--max-ref", fa.max_ref, "number of refinements (adaptive)")->check(CLI::NonNegativeNumber);
  of->add_option("--flo-out", fa.flo_out, "output .flo");
  of->add_option("--color-out", fa.color_out, "colour-coded flow (.ppm or .png)");
  of->add_option("--mesh-out", fa.mesh_out, "prefix for numbered mesh CSV/SVG files");
  of->add_option("--metrics-out", fa.metrics_out, "metrics CSV");

  DiskArgs ka;
  auto* disk = app.add_subcommand("disk-bench", "convergence study on the disk with known solution");
  disk->add_option("--radius", ka.radius, "disk radius")->check(CLI::PositiveNumber)->capture_default_str();
  disk->add_option("--alphas", ka.alphas, "alpha1,alpha2")->delimiter(',')->expected(2);
  disk->add_option("--levels", ka.levels, "adaptive refinements")->check(CLI::NonNegativeNumber)->capture_default_str();
  disk->add_option("--resolutions", ka.resolutions, "uniform grid sizes")->delimiter(',');
  disk->add_option("--coarse", ka.coarse, "initial adaptive grid size")->check(CLI::PositiveNumber);
  disk->add_option("--theta", ka.theta, "Dorfler fraction")->check(CLI::Range(0.0, 1.0));
  disk->add_option("--csv-out", ka.csv_out, "convergence table CSV");

  TvArgs ta;
  auto* tv = app.add_subcommand("tv-analyze", "discrete TV before and after one refinement");
  tv->add_option("--input", ta.input, "input image")->required()->check(CLI::ExistingFile);
  tv->add_option("--r", ta.r, "norm exponent")->check(CLI::Range(1.0, 1e9))->capture_default_str();
  tv->add_option("--refine-once", ta.refine, "uniform or gradient")
      ->check(CLI::IsMember({"uniform", "gradient"}))
      ->capture_default_str();
  tv->add_option("--bins", ta.bins, "histogram bins")->check(CLI::PositiveNumber);
  tv->add_option("--csv-out", ta.csv_out, "mu histogram CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Eigen::setNbThreads(threads);
  try {
    if (*den) return run_denoise(da, mf, seed);
    if (*of) return run_optflow(fa, mf);
    if (*disk) return run_disk(ka, mf);
    if (*tv) return run_tv(ta);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace quadtv::cli
