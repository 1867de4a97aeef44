#include "quadtv/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <png.h>

namespace quadtv {

namespace {

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Next header token of a PNM file, skipping whitespace and comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  if (tok.empty()) throw std::runtime_error("pgm: truncated header");
  return tok;
}

int pnm_int(std::istream& in) {
  const std::string tok = pnm_token(in);
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("pgm: malformed header field '" + tok + "'");
  }
  if (pos != tok.size() || v <= 0) throw std::runtime_error("pgm: malformed header field '" + tok + "'");
  return v;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::string magic = pnm_token(in);
  if (magic != "P2" && magic != "P5") throw std::runtime_error("pgm: unsupported magic '" + magic + "' in " + path);
  const int w = pnm_int(in);
  const int h = pnm_int(in);
  const int maxval = pnm_int(in);
  if (maxval > 65535) throw std::runtime_error("pgm: maxval out of range");
  Image img(w, h);
  if (magic == "P5") {
    if (maxval > 255) throw std::runtime_error("pgm: 16-bit binary PGM is not supported");
    std::vector<unsigned char> buf(img.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw std::runtime_error("pgm: truncated pixel data");
    for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / static_cast<double>(maxval);
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) {
      int v = -1;
      if (!(in >> v) || v < 0 || v > maxval) throw std::runtime_error("pgm: bad pixel value");
      img.pixels[i] = v / static_cast<double>(maxval);
    }
  }
  return img;
}

void write_pgm(const Image& img, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << (binary ? "P5" : "P2") << '\n' << img.width << ' ' << img.height << "\n255\n";
  if (binary) {
    std::vector<unsigned char> buf(img.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.pixels[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  } else {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out << (x ? " " : "") << static_cast<int>(to_byte(img.at(x, y)));
      out << '\n';
    }
  }
}

Image read_png(const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    throw std::runtime_error("png: cannot read " + path + ": " + pi.message);
  if (pi.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&pi);
    throw std::runtime_error("png: 16-bit images are not supported");
  }
  pi.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr))
    throw std::runtime_error("png: cannot decode " + path + ": " + pi.message);
  Image img(static_cast<int>(pi.width), static_cast<int>(pi.height));
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  return img;
}

void write_png(const Image& img, const std::string& path) {
  std::vector<png_byte> buf(img.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.pixels[i]);
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("png: cannot write " + path + ": " + pi.message);
}

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() >= 8 && png_sig_cmp(head.data(), 0, 8) == 0) return read_png(path);
  if (in.gcount() >= 2 && head[0] == 'P' && (head[1] == '2' || head[1] == '5')) return read_pgm(path);
  throw std::runtime_error("unsupported image format: " + path);
}

void write_image(const Image& img, const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "png") return write_png(img, path);
  if (ext == "pgm") return write_pgm(img, path, true);
  throw std::invalid_argument("unsupported image extension: " + path);
}

bool FlowField::known(std::size_t i) const {
  return std::isfinite(u[i]) && std::isfinite(v[i]) && std::abs(u[i]) <= kUnknownFlow && std::abs(v[i]) <= kUnknownFlow;
}

FlowField read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  float magic = 0.0f;
  std::int32_t w = 0;
  std::int32_t h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in) throw std::runtime_error("flo: truncated header in " + path);
  if (magic != kFloMagic) throw std::runtime_error("flo: bad magic number in " + path);
  if (w <= 0 || h <= 0 || static_cast<std::int64_t>(w) * h > (std::int64_t{1} << 30))
    throw std::runtime_error("flo: implausible size in " + path);
  FlowField f(w, h);
  std::vector<float> buf(2 * f.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
    throw std::runtime_error("flo: truncated payload in " + path);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = buf[2 * i];
    f.v[i] = buf[2 * i + 1];
  }
  return f;
}

void write_flo(const FlowField& flow, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const float magic = kFloMagic;
  const std::int32_t w = flow.width;
  const std::int32_t h = flow.height;
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> buf(2 * flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    buf[2 * i] = static_cast<float>(flow.u[i]);
    buf[2 * i + 1] = static_cast<float>(flow.v[i]);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

namespace {

std::vector<std::array<double, 3>> color_wheel() {
  constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::vector<std::array<double, 3>> w;
  for (int i = 0; i < RY; ++i) w.push_back({255, 255.0 * i / RY, 0});
  for (int i = 0; i < YG; ++i) w.push_back({255 - 255.0 * i / YG, 255, 0});
  for (int i = 0; i < GC; ++i) w.push_back({0, 255, 255.0 * i / GC});
  for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255.0 * i / CB, 255});
  for (int i = 0; i < BM; ++i) w.push_back({255.0 * i / BM, 0, 255});
  for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255.0 * i / MR});
  return w;
}

}  // namespace

RgbImage flow_to_color(const FlowField& flow, std::optional<double> max_mag) {
  static const auto wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  double norm = 0.0;
  if (max_mag) {
    norm = *max_mag;
  } else {
    for (std::size_t i = 0; i < flow.size(); ++i)
      if (flow.known(i)) norm = std::max(norm, std::hypot(flow.u[i], flow.v[i]));
  }
  if (norm <= 0.0) norm = 1.0;

  RgbImage out{flow.width, flow.height, std::vector<std::uint8_t>(3 * flow.size(), 0)};
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!flow.known(i)) continue;
    const double fu = flow.u[i] / norm;
    const double fv = flow.v[i] / norm;
    const double rad = std::hypot(fu, fv);
    const double a = std::atan2(-fv, -fu) / std::numbers::pi;
    const double fk = (a + 1.0) / 2.0 * (ncols - 1);
    const int k0 = static_cast<int>(fk);
    const int k1 = (k0 + 1) % ncols;
    const double f = fk - k0;
    for (int c = 0; c < 3; ++c) {
      double col = ((1 - f) * wheel[static_cast<std::size_t>(k0)][static_cast<std::size_t>(c)] +
                    f * wheel[static_cast<std::size_t>(k1)][static_cast<std::size_t>(c)]) /
                   255.0;
      col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
      out.data[3 * i + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::floor(255.0 * col));
    }
  }
  return out;
}

void write_rgb(const RgbImage& img, const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "png") {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&pi, path.c_str(), 0, img.data.data(), 0, nullptr))
      throw std::runtime_error("png: cannot write " + path + ": " + pi.message);
    return;
  }
  if (ext != "ppm") throw std::invalid_argument("unsupported colour image extension: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

}  // namespace quadtv
