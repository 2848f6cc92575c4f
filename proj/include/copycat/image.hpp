#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "copycat/common.hpp"
#include "copycat/rng.hpp"

namespace copycat {

// 8-bit image, row-major, interleaved. channels is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> pixels;

  size_t pixel_count() const { return size_t(width) * height * channels; }
  uint8_t& at(int y, int x, int c) { return pixels[(size_t(y) * width + x) * channels + c]; }
  uint8_t at(int y, int x, int c) const { return pixels[(size_t(y) * width + x) * channels + c]; }
};

// Throws IoError on malformed bytes. Alpha is composited against black,
// palette and 16-bit depths are folded to 8-bit gray or RGB.
Image decode_png(std::span<const uint8_t> bytes);
std::vector<uint8_t> encode_png(const Image& image);
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& image);

// Digest of the decoded canonical pixel buffer (dims + channels + bytes),
// so the same picture dedups across encodings.
std::string pixel_digest(const Image& image);

// Planar float image with values in [0, 1]; the working representation for
// augmentation and glyph rendering. Layout: channel-major (c * h * w).
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> values;

  FloatImage() = default;
  FloatImage(int h, int w, int c) : width(w), height(h), channels(c), values(size_t(h) * w * c, 0.f) {}
  float& at(int c, int y, int x) { return values[(size_t(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return values[(size_t(c) * height + y) * width + x]; }
};

FloatImage to_float(const Image& image);
Image to_image(const FloatImage& plane);  // clamps to [0,1], rounds to 8-bit

FloatImage resize_bilinear(const FloatImage& src, int new_height, int new_width);
FloatImage convert_channels(const FloatImage& src, int target_channels);

namespace imgproc {

// Affine maps are destination -> source: dst(y, x) samples src at
// (m[0]*x + m[1]*y + m[2], m[3]*x + m[4]*y + m[5]); bilinear, zero border.
using AffineMap = std::array<double, 6>;

// Inverse map for rotate/scale/shear about the image center plus translation.
AffineMap make_affine(int height, int width, double angle_rad, double scale_x, double scale_y,
                      double shear_x_rad, double tx, double ty);

FloatImage affine_warp(const FloatImage& src, const AffineMap& map);
void hflip(FloatImage& image);
FloatImage gaussian_blur(const FloatImage& src, double sigma);
FloatImage sharpen(const FloatImage& src, double sigma, double amount);
void add_intensity(FloatImage& image, double delta);
void adjust_contrast(FloatImage& image, double factor);  // linear around 0.5
void add_gaussian_noise(FloatImage& image, double sigma, Rng& rng);
FloatImage crop_resize(const FloatImage& src, int y0, int x0, int crop_h, int crop_w);
FloatImage piecewise_affine(const FloatImage& src, int grid_cells, double max_displacement, Rng& rng);

}  // namespace imgproc

}  // namespace copycat
