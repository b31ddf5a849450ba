#include "gazekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gazekit/parallel.hpp"

namespace gazekit {

namespace {

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

inline double sample_bilinear(const GrayImage& src, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0;
  double fy = y - y0;
  if (x0 == src.width - 1) { x0 -= 1; fx = 1.0; }
  if (y0 == src.height - 1) { y0 -= 1; fy = 1.0; }
  const double v00 = src.at(x0, y0);
  const double v10 = src.at(x0 + 1, y0);
  const double v01 = src.at(x0, y0 + 1);
  const double v11 = src.at(x0 + 1, y0 + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

// Catmull-Rom (a = -0.5) cubic kernel.
inline double cubic_weight(double t) {
  t = std::abs(t);
  if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace

WarpResult perspective_warp(const GrayImage& src, const Mat3& warp, int out_width, int out_height) {
  if (std::abs(warp.determinant()) < 1e-12)
    fail(ErrorKind::SingularWarp, "warp matrix is not invertible");
  if (src.empty()) fail(ErrorKind::EmptyInput, "empty source image");

  const Mat3 inv = warp.inverse();
  WarpResult out;
  out.image = GrayImage(out_width, out_height);
  std::vector<int> inside_per_row(out_height, 0);

  parallel_for(out_height, [&](std::ptrdiff_t y) {
    int inside = 0;
    for (int x = 0; x < out_width; ++x) {
      const Vec3 s = inv * Vec3(static_cast<double>(x), static_cast<double>(y), 1.0);
      double val = 0.0;
      if (s.z() != 0.0) {
        const double sx = s.x() / s.z();
        const double sy = s.y() / s.z();
        if (sx >= 0.0 && sx <= src.width - 1 && sy >= 0.0 && sy <= src.height - 1) {
          val = sample_bilinear(src, sx, sy);
          ++inside;
        }
      }
      out.image.at(x, static_cast<int>(y)) = clamp_u8(val);
    }
    inside_per_row[y] = inside;
  });

  long total_inside = 0;
  for (int n : inside_per_row) total_inside += n;
  out.coverage = static_cast<double>(total_inside) / (static_cast<double>(out_width) * out_height);
  return out;
}

GrayImage equalize_histogram(const GrayImage& img) {
  if (img.empty()) fail(ErrorKind::EmptyInput, "empty image");
  std::array<std::size_t, 256> counts{};
  for (std::uint8_t v : img.pixels) ++counts[v];
  std::array<std::uint8_t, 256> map{};
  std::size_t cumulative = 0;
  const double total = static_cast<double>(img.pixels.size());
  for (int v = 0; v < 256; ++v) {
    cumulative += counts[v];
    map[v] = static_cast<std::uint8_t>(std::lround(255.0 * (cumulative / total)));
  }
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = map[img.pixels[i]];
  return out;
}

GrayImage resize(const GrayImage& img, int out_width, int out_height, Interpolation method) {
  if (out_width < 1 || out_height < 1) fail(ErrorKind::InvalidArgument, "output size must be >= 1");
  if (img.empty()) fail(ErrorKind::EmptyInput, "empty image");
  if (out_width == img.width && out_height == img.height) return img;

  const double sx = static_cast<double>(img.width) / out_width;
  const double sy = static_cast<double>(img.height) / out_height;
  const auto clamp_x = [&](int x) { return std::clamp(x, 0, img.width - 1); };
  const auto clamp_y = [&](int y) { return std::clamp(y, 0, img.height - 1); };

  // Horizontal pass into a real-valued buffer, then vertical.
  std::vector<double> mid(static_cast<std::size_t>(out_width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const double cx = (x + 0.5) * sx - 0.5;
      const int ix = static_cast<int>(std::floor(cx));
      const double t = cx - ix;
      double acc = 0.0;
      if (method == Interpolation::Bicubic) {
        for (int k = -1; k <= 2; ++k)
          acc += cubic_weight(t - k) * img.at(clamp_x(ix + k), y);
      } else {
        acc = (1.0 - t) * img.at(clamp_x(ix), y) + t * img.at(clamp_x(ix + 1), y);
      }
      mid[static_cast<std::size_t>(y) * out_width + x] = acc;
    }
  }

  GrayImage out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    const double cy = (y + 0.5) * sy - 0.5;
    const int iy = static_cast<int>(std::floor(cy));
    const double t = cy - iy;
    for (int x = 0; x < out_width; ++x) {
      double acc = 0.0;
      if (method == Interpolation::Bicubic) {
        for (int k = -1; k <= 2; ++k)
          acc += cubic_weight(t - k) * mid[static_cast<std::size_t>(clamp_y(iy + k)) * out_width + x];
      } else {
        acc = (1.0 - t) * mid[static_cast<std::size_t>(clamp_y(iy)) * out_width + x] +
              t * mid[static_cast<std::size_t>(clamp_y(iy + 1)) * out_width + x];
      }
      out.at(x, y) = clamp_u8(acc);
    }
  }
  return out;
}

GrayImage to_grayscale(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    fail(ErrorKind::ShapeMismatch, "rgb buffer size does not match dimensions");
  GrayImage out(width, height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double y = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(y));
  }
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(img.width - 1 - x, y) = img.at(x, y);
  return out;
}

double left_right_intensity_diff(const GrayImage& img) {
  if (img.empty()) fail(ErrorKind::EmptyInput, "empty image");
  const int half = img.width / 2;
  if (half == 0) return 0.0;
  double left = 0.0, right = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < half; ++x) {
      left += img.at(x, y);
      right += img.at(img.width - 1 - x, y);
    }
  }
  const double n = static_cast<double>(half) * img.height;
  return (left - right) / n;
}

double mean_intensity(const GrayImage& img) {
  if (img.empty()) fail(ErrorKind::EmptyInput, "empty image");
  double sum = 0.0;
  for (std::uint8_t v : img.pixels) sum += v;
  return sum / static_cast<double>(img.pixels.size());
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!f) fail(ErrorKind::IoError, "short write to " + path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") fail(ErrorKind::ParseError, path + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0 || maxval != 255)
    fail(ErrorKind::ParseError, path + ": unsupported PGM header");
  f.get();  // single whitespace after header
  GrayImage img(w, h);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    fail(ErrorKind::ParseError, path + ": truncated pixel data");
  return img;
}

}  // namespace gazekit
