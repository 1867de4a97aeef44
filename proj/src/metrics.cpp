#include "quadtv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quadtv {

namespace {

void check_same(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.size() == 0)
    throw std::invalid_argument("metrics: images differ in size or are empty");
}

void check_same(const FlowField& a, const FlowField& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("metrics: flow fields differ in size");
}

template <class F>
FlowError accumulate(const FlowField& flow, const FlowField& gt, F per_pixel) {
  check_same(flow, gt);
  FlowError e;
  e.field.assign(flow.size(), std::numeric_limits<double>::quiet_NaN());
  double s = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!gt.known(i)) continue;
    const double v = per_pixel(flow.u[i], flow.v[i], gt.u[i], gt.v[i]);
    e.field[i] = v;
    s += v;
    s2 += v * v;
    ++e.count;
  }
  if (e.count > 0) {
    e.mean = s / e.count;
    e.stddev = std::sqrt(std::max(0.0, s2 / e.count - e.mean * e.mean));
  }
  return e;
}

}  // namespace

double psnr(const Image& u, const Image& ref) {
  check_same(u, ref);
  double mse = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) mse += (u.pixels[i] - ref.pixels[i]) * (u.pixels[i] - ref.pixels[i]);
  mse /= static_cast<double>(u.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double mssim(const Image& u, const Image& ref) {
  check_same(u, ref);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int wx = std::min(kSsimWindow, u.width);
  const int wy = std::min(kSsimWindow, u.height);
  const double n = static_cast<double>(wx) * wy;
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + wy <= u.height; ++y0) {
    for (int x0 = 0; x0 + wx <= u.width; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + wy; ++y) {
        for (int x = x0; x < x0 + wx; ++x) {
          const double a = u.at(x, y);
          const double b = ref.at(x, y);
          sa += a;
          sb += b;
          saa += a * a;
          sbb += b * b;
          sab += a * b;
        }
      }
      const double ma = sa / n;
      const double mb = sb / n;
      const double va = saa / n - ma * ma;
      const double vb = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / windows;
}

FlowError endpoint_error(const FlowField& flow, const FlowField& gt) {
  return accumulate(flow, gt, [](double ux, double uy, double gx, double gy) { return std::hypot(ux - gx, uy - gy); });
}

FlowError angular_error(const FlowField& flow, const FlowField& gt) {
  return accumulate(flow, gt, [](double ux, double uy, double gx, double gy) {
    const double c = (1.0 + ux * gx + uy * gy) / (std::sqrt(1.0 + ux * ux + uy * uy) * std::sqrt(1.0 + gx * gx + gy * gy));
    return std::acos(std::clamp(c, -1.0, 1.0));
  });
}

}  // namespace quadtv
