#include "copycat/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "copycat/sha256.hpp"

namespace copycat {

Image decode_png(std::span<const uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    std::string msg = png.message;
    png_image_free(&png);
    throw IoError("decode_png: " + msg);
  }
  Image out;
  out.width = int(png.width);
  out.height = int(png.height);
  out.channels = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.pixels.resize(out.pixel_count());
  png_color background = {0, 0, 0};
  if (!png_image_finish_read(&png, &background, out.pixels.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw IoError("decode_png: " + msg);
  }
  return out;
}

std::vector<uint8_t> encode_png(const Image& image) {
  if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() != image.pixel_count()) {
    throw ValidationError("encode_png: inconsistent image");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(image.width);
  png.height = png_uint_32(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("encode_png: ") + png.message);
  }
  std::vector<uint8_t> bytes(size);
  if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("encode_png: ") + png.message);
  }
  bytes.resize(size);
  return bytes;
}

Image load_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_png: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path + ")");
  }
}

void save_png(const std::string& path, const Image& image) {
  const std::vector<uint8_t> bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_png: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("save_png: short write to " + path);
}

std::string pixel_digest(const Image& image) {
  std::vector<uint8_t> buffer;
  buffer.reserve(12 + image.pixels.size());
  const auto push_le32 = [&buffer](uint32_t v) {
    for (int i = 0; i < 4; ++i) buffer.push_back(uint8_t(v >> (8 * i)));
  };
  push_le32(uint32_t(image.width));
  push_le32(uint32_t(image.height));
  push_le32(uint32_t(image.channels));
  buffer.insert(buffer.end(), image.pixels.begin(), image.pixels.end());
  return sha256_hex(buffer);
}

FloatImage to_float(const Image& image) {
  FloatImage out(image.height, image.width, image.channels);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = float(image.at(y, x, c)) / 255.f;
  return out;
}

Image to_image(const FloatImage& plane) {
  Image out;
  out.width = plane.width;
  out.height = plane.height;
  out.channels = plane.channels;
  out.pixels.resize(out.pixel_count());
  for (int c = 0; c < plane.channels; ++c)
    for (int y = 0; y < plane.height; ++y)
      for (int x = 0; x < plane.width; ++x) {
        const float v = std::clamp(plane.at(c, y, x), 0.f, 1.f);
        out.at(y, x, c) = uint8_t(std::lround(v * 255.f));
      }
  return out;
}

FloatImage resize_bilinear(const FloatImage& src, int new_height, int new_width) {
  if (new_height <= 0 || new_width <= 0) throw ValidationError("resize_bilinear: bad size");
  if (new_height == src.height && new_width == src.width) return src;
  FloatImage out(new_height, new_width, src.channels);
  const double sy = double(src.height) / new_height;
  const double sx = double(src.width) / new_width;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < new_height; ++y) {
      const double fy = (y + 0.5) * sy - 0.5;
      const int y0 = std::clamp(int(std::floor(fy)), 0, src.height - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double wy = std::clamp(fy - y0, 0.0, 1.0);
      for (int x = 0; x < new_width; ++x) {
        const double fx = (x + 0.5) * sx - 0.5;
        const int x0 = std::clamp(int(std::floor(fx)), 0, src.width - 1);
        const int x1 = std::min(x0 + 1, src.width - 1);
        const double wx = std::clamp(fx - x0, 0.0, 1.0);
        const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        out.at(c, y, x) = float(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

FloatImage convert_channels(const FloatImage& src, int target_channels) {
  if (target_channels != 1 && target_channels != 3)
    throw ValidationError("convert_channels: target must be 1 or 3");
  if (src.channels == target_channels) return src;
  FloatImage out(src.height, src.width, target_channels);
  if (src.channels == 1) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) out.at(c, y, x) = src.at(0, y, x);
  } else {
    // ITU-R BT.601 luma
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x)
        out.at(0, y, x) = 0.299f * src.at(0, y, x) + 0.587f * src.at(1, y, x) + 0.114f * src.at(2, y, x);
  }
  return out;
}

namespace imgproc {

AffineMap make_affine(int height, int width, double angle_rad, double scale_x, double scale_y,
                      double shear_x_rad, double tx, double ty) {
  // Forward transform about the center: scale, shear, rotate, translate.
  // We need the inverse (dst -> src), so build the forward 2x2 and invert it.
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double cos_a = std::cos(angle_rad);
  const double sin_a = std::sin(angle_rad);
  const double sh = std::tan(shear_x_rad);
  // forward = R(angle) * Shear(sh) * S(scale)
  const double f00 = cos_a * scale_x;
  const double f01 = cos_a * (sh * scale_y) - sin_a * scale_y;
  const double f10 = sin_a * scale_x;
  const double f11 = sin_a * (sh * scale_y) + cos_a * scale_y;
  const double det = f00 * f11 - f01 * f10;
  if (std::abs(det) < 1e-12) throw ValidationError("make_affine: singular transform");
  const double i00 = f11 / det;
  const double i01 = -f01 / det;
  const double i10 = -f10 / det;
  const double i11 = f00 / det;
  // dst (x,y) -> src: subtract center+translation, apply inverse, add center
  AffineMap m;
  m[0] = i00;
  m[1] = i01;
  m[2] = cx - i00 * (cx + tx) - i01 * (cy + ty);
  m[3] = i10;
  m[4] = i11;
  m[5] = cy - i10 * (cx + tx) - i11 * (cy + ty);
  return m;
}

static float sample_bilinear(const FloatImage& src, int c, double y, double x) {
  if (y < -1 || x < -1 || y > src.height || x > src.width) return 0.f;
  const int x0 = int(std::floor(x));
  const int y0 = int(std::floor(y));
  const double wx = x - x0;
  const double wy = y - y0;
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy) {
    const int yy = y0 + dy;
    if (yy < 0 || yy >= src.height) continue;
    for (int dx = 0; dx <= 1; ++dx) {
      const int xx = x0 + dx;
      if (xx < 0 || xx >= src.width) continue;
      const double w = (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
      acc += w * src.at(c, yy, xx);
    }
  }
  return float(acc);
}

FloatImage affine_warp(const FloatImage& src, const AffineMap& m) {
  FloatImage out(src.height, src.width, src.channels);
  for (int c = 0; c < src.channels; ++c)
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const double sx = m[0] * x + m[1] * y + m[2];
        const double sy = m[3] * x + m[4] * y + m[5];
        out.at(c, y, x) = sample_bilinear(src, c, sy, sx);
      }
  return out;
}

void hflip(FloatImage& image) {
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width / 2; ++x)
        std::swap(image.at(c, y, x), image.at(c, y, image.width - 1 - x));
}

FloatImage gaussian_blur(const FloatImage& src, double sigma) {
  if (sigma <= 0) return src;
  const int radius = std::max(1, int(std::ceil(3 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  FloatImage tmp(src.height, src.width, src.channels);
  FloatImage out(src.height, src.width, src.channels);
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, src.width - 1);
          acc += kernel[i + radius] * src.at(c, y, xx);
        }
        tmp.at(c, y, x) = float(acc);
      }
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, src.height - 1);
          acc += kernel[i + radius] * tmp.at(c, yy, x);
        }
        out.at(c, y, x) = float(acc);
      }
  }
  return out;
}

FloatImage sharpen(const FloatImage& src, double sigma, double amount) {
  const FloatImage blurred = gaussian_blur(src, sigma);
  FloatImage out(src.height, src.width, src.channels);
  for (size_t i = 0; i < src.values.size(); ++i) {
    out.values[i] = std::clamp(src.values[i] + float(amount) * (src.values[i] - blurred.values[i]), 0.f, 1.f);
  }
  return out;
}

void add_intensity(FloatImage& image, double delta) {
  for (float& v : image.values) v = std::clamp(v + float(delta), 0.f, 1.f);
}

void adjust_contrast(FloatImage& image, double factor) {
  for (float& v : image.values) v = std::clamp(0.5f + float(factor) * (v - 0.5f), 0.f, 1.f);
}

void add_gaussian_noise(FloatImage& image, double sigma, Rng& rng) {
  for (float& v : image.values) v = std::clamp(v + float(rng.normal(0.0, sigma)), 0.f, 1.f);
}

FloatImage crop_resize(const FloatImage& src, int y0, int x0, int crop_h, int crop_w) {
  if (crop_h < 1 || crop_w < 1 || y0 < 0 || x0 < 0 || y0 + crop_h > src.height || x0 + crop_w > src.width)
    throw ValidationError("crop_resize: crop out of bounds");
  FloatImage crop(crop_h, crop_w, src.channels);
  for (int c = 0; c < src.channels; ++c)
    for (int y = 0; y < crop_h; ++y)
      for (int x = 0; x < crop_w; ++x) crop.at(c, y, x) = src.at(c, y0 + y, x0 + x);
  return resize_bilinear(crop, src.height, src.width);
}

FloatImage piecewise_affine(const FloatImage& src, int grid_cells, double max_displacement, Rng& rng) {
  // Jitter a (grid_cells+1)^2 lattice of control points, interpolate the
  // displacement field bilinearly, sample backwards.
  const int nodes = grid_cells + 1;
  std::vector<double> dx(size_t(nodes) * nodes), dy(size_t(nodes) * nodes);
  for (size_t i = 0; i < dx.size(); ++i) {
    dx[i] = rng.uniform(-max_displacement, max_displacement);
    dy[i] = rng.uniform(-max_displacement, max_displacement);
  }
  // Border nodes stay put so content is not pulled in from outside.
  for (int i = 0; i < nodes; ++i) {
    dx[i] = dy[i] = 0;
    dx[size_t(nodes - 1) * nodes + i] = dy[size_t(nodes - 1) * nodes + i] = 0;
    dx[size_t(i) * nodes] = dy[size_t(i) * nodes] = 0;
    dx[size_t(i) * nodes + nodes - 1] = dy[size_t(i) * nodes + nodes - 1] = 0;
  }
  FloatImage out(src.height, src.width, src.channels);
  for (int y = 0; y < src.height; ++y) {
    const double gy = double(y) / std::max(1, src.height - 1) * grid_cells;
    const int g0y = std::min(int(gy), grid_cells - 1);
    const double fy = gy - g0y;
    for (int x = 0; x < src.width; ++x) {
      const double gx = double(x) / std::max(1, src.width - 1) * grid_cells;
      const int g0x = std::min(int(gx), grid_cells - 1);
      const double fx = gx - g0x;
      const auto node = [&](int r, int c) { return size_t(r) * nodes + c; };
      const double ddx = dx[node(g0y, g0x)] * (1 - fx) * (1 - fy) + dx[node(g0y, g0x + 1)] * fx * (1 - fy) +
                         dx[node(g0y + 1, g0x)] * (1 - fx) * fy + dx[node(g0y + 1, g0x + 1)] * fx * fy;
      const double ddy = dy[node(g0y, g0x)] * (1 - fx) * (1 - fy) + dy[node(g0y, g0x + 1)] * fx * (1 - fy) +
                         dy[node(g0y + 1, g0x)] * (1 - fx) * fy + dy[node(g0y + 1, g0x + 1)] * fx * fy;
      for (int c = 0; c < src.channels; ++c) out.at(c, y, x) = sample_bilinear(src, c, y + ddy, x + ddx);
    }
  }
  return out;
}

}  // namespace imgproc

}  // namespace copycat
