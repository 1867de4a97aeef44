#pragma once

#include <vector>

#include "quadtv/image_io.hpp"

namespace quadtv {

/// 10 log10(1 / MSE) for images in [0, 1]; +inf for identical inputs.
double psnr(const Image& u, const Image& ref);

inline constexpr int kSsimWindow = 7;

/// Mean SSIM over all 7x7 windows (stride 1, uniform weights, population
/// statistics, c1 = 0.01^2, c2 = 0.03^2). The window shrinks to the image
/// size for images smaller than 7 pixels.
double mssim(const Image& u, const Image& ref);

struct FlowError {
  std::vector<double> field;  // NaN where the ground truth is unknown
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

FlowError endpoint_error(const FlowField& flow, const FlowField& gt);
FlowError angular_error(const FlowField& flow, const FlowField& gt);

}  // namespace quadtv
