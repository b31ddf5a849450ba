#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazekit/geometry.hpp"

namespace gazekit {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return pixels.empty(); }
};

struct WarpResult {
  GrayImage image;
  double coverage = 0.0;  // fraction of output pixels sampled inside the source
};

/// Inverse-map each output pixel through warp^-1 and sample the source
/// bilinearly; samples outside the source contribute 0 and lower coverage.
WarpResult perspective_warp(const GrayImage& src, const Mat3& warp, int out_width, int out_height);

/// Classic global histogram equalization: out = round(255 * cdf(v)).
GrayImage equalize_histogram(const GrayImage& img);

enum class Interpolation { Bilinear, Bicubic };

/// Separable resampling; bicubic uses the Catmull-Rom kernel.
GrayImage resize(const GrayImage& img, int out_width, int out_height,
                 Interpolation method = Interpolation::Bicubic);

/// Interleaved 8-bit RGB to luma (0.299, 0.587, 0.114), rounded.
GrayImage to_grayscale(int width, int height, const std::vector<std::uint8_t>& rgb);

GrayImage flip_horizontal(const GrayImage& img);

/// Mean intensity of the left half minus the right half (odd middle column
/// excluded), used as the directional-lighting statistic.
double left_right_intensity_diff(const GrayImage& img);

double mean_intensity(const GrayImage& img);

// Binary PGM (P5, maxval 255) container used for all image fixtures.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

}  // namespace gazekit
