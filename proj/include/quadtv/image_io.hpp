#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quadtv/mesh.hpp"

namespace quadtv {

/// Grayscale images in [0, 1]. Format is chosen from the file extension
/// (.pgm or .png); reading also sniffs the magic bytes.
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path);

Image read_pgm(const std::string& path);
void write_pgm(const Image& img, const std::string& path, bool binary = true);
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

/// Dense two-component flow on a pixel grid, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0),
        v(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0) {}

  [[nodiscard]] std::size_t size() const { return u.size(); }
  [[nodiscard]] bool known(std::size_t i) const;
};

inline constexpr double kUnknownFlow = 1e9;
inline constexpr float kFloMagic = 202021.25f;

FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB
};

/// Colour-wheel rendering of a flow field. Magnitudes are normalized by
/// `max_mag` or by the largest known magnitude; unknown pixels are black.
RgbImage flow_to_color(const FlowField& flow, std::optional<double> max_mag = std::nullopt);

/// Writes .ppm (binary P6) or .png depending on the extension.
void write_rgb(const RgbImage& img, const std::string& path);

}  // namespace quadtv
