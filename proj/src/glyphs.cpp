#include "copycat/glyphs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>

#include "copycat/rng.hpp"

namespace fs = std::filesystem;

namespace copycat {

namespace {

// Classic 5x7 dot-matrix font, rows top to bottom.
using Bitmap = std::array<const char*, 7>;

const Bitmap kDigits[10] = {
    {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},  // 0
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},  // 1
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},  // 2
    {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."},  // 3
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},  // 4
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},  // 5
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},  // 6
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},  // 7
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},  // 8
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},  // 9
};

const Bitmap kLetters[26] = {
    {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // A
    {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},  // B
    {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},  // C
    {"###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."},  // D
    {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},  // E
    {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},  // F
    {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."},  // G
    {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // H
    {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},  // I
    {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},  // J
    {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},  // K
    {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},  // L
    {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},  // M
    {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"},  // N
    {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // O
    {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},  // P
    {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},  // Q
    {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},  // R
    {".####", "#....", "#....", ".###.", "....#", "....#", "####."},  // S
    {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},  // T
    {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // U
    {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},  // V
    {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"},  // W
    {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},  // X
    {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},  // Y
    {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},  // Z
};

constexpr int kShapeCount = 8;

FloatImage bitmap_to_float(const Bitmap& bm) {
  FloatImage out(7, 5, 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 5; ++x) out.at(0, y, x) = bm[size_t(y)][size_t(x)] == '#' ? 1.0f : 0.0f;
  return out;
}

void draw_line(FloatImage& img, double x0, double y0, double x1, double y1, double thickness) {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  const int ylo = std::max(0, int(std::floor(std::min(y0, y1) - thickness - 1)));
  const int yhi = std::min(img.height - 1, int(std::ceil(std::max(y0, y1) + thickness + 1)));
  const int xlo = std::max(0, int(std::floor(std::min(x0, x1) - thickness - 1)));
  const int xhi = std::min(img.width - 1, int(std::ceil(std::max(x0, x1) + thickness + 1)));
  for (int y = ylo; y <= yhi; ++y) {
    for (int x = xlo; x <= xhi; ++x) {
      double t = 0.0;
      if (len2 > 0) t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
      const double px = x0 + t * dx, py = y0 + t * dy;
      const double d = std::hypot(x - px, y - py);
      const float v = float(std::clamp(thickness + 0.5 - d, 0.0, 1.0));
      img.at(0, y, x) = std::max(img.at(0, y, x), v);
    }
  }
}

// Line-drawn shapes on a 21x21 canvas: ring, box, triangle, plus, cross,
// diamond, bars, arrow.
FloatImage shape_bitmap(int cls, Rng& rng) {
  const int s = 21;
  FloatImage img(s, s, 1);
  const double c = (s - 1) / 2.0;
  const double r = c * rng.uniform(0.72, 0.95);
  const double t = rng.uniform(1.0, 1.8);
  auto poly = [&](const std::vector<std::pair<double, double>>& pts) {
    for (size_t i = 0; i < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % pts.size()];
      draw_line(img, a.first, a.second, b.first, b.second, t);
    }
  };
  switch (cls) {
    case 0: {  // ring
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i < 20; ++i) {
        const double a = 2.0 * 3.14159265358979323846 * i / 20;
        pts.emplace_back(c + r * std::cos(a), c + r * std::sin(a));
      }
      poly(pts);
      break;
    }
    case 1:  // box
      poly({{c - r, c - r}, {c + r, c - r}, {c + r, c + r}, {c - r, c + r}});
      break;
    case 2:  // triangle
      poly({{c, c - r}, {c + r, c + r * 0.8}, {c - r, c + r * 0.8}});
      break;
    case 3:  // plus
      draw_line(img, c - r, c, c + r, c, t);
      draw_line(img, c, c - r, c, c + r, t);
      break;
    case 4:  // cross
      draw_line(img, c - r, c - r, c + r, c + r, t);
      draw_line(img, c - r, c + r, c + r, c - r, t);
      break;
    case 5:  // diamond
      poly({{c, c - r}, {c + r, c}, {c, c + r}, {c - r, c}});
      break;
    case 6:  // bars
      for (int i = -1; i <= 1; ++i)
        draw_line(img, c - r, c + i * r * 0.8, c + r, c + i * r * 0.8, t);
      break;
    case 7:  // arrow
      draw_line(img, c, c + r, c, c - r, t);
      draw_line(img, c - r * 0.6, c - r * 0.3, c, c - r, t);
      draw_line(img, c + r * 0.6, c - r * 0.3, c, c - r, t);
      break;
    default:
      throw ValidationError("shape class out of range");
  }
  return img;
}

void paste_centered(FloatImage& canvas, const FloatImage& glyph) {
  const int oy = (canvas.height - glyph.height) / 2;
  const int ox = (canvas.width - glyph.width) / 2;
  for (int y = 0; y < glyph.height; ++y) {
    const int cy = y + oy;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int x = 0; x < glyph.width; ++x) {
      const int cx = x + ox;
      if (cx < 0 || cx >= canvas.width) continue;
      canvas.at(0, cy, cx) = glyph.at(0, y, x);
    }
  }
}

const char* domain_prefix(GlyphDomain domain) {
  switch (domain) {
    case GlyphDomain::kDigits:
      return "d";
    case GlyphDomain::kLetters:
      return "l";
    case GlyphDomain::kShapes:
      return "s";
  }
  return "?";
}

}  // namespace

GlyphDomain glyph_domain_from(const std::string& name) {
  if (name == "digits") return GlyphDomain::kDigits;
  if (name == "letters") return GlyphDomain::kLetters;
  if (name == "shapes") return GlyphDomain::kShapes;
  throw ValidationError("unknown glyph domain: " + name);
}

int glyph_class_count(GlyphDomain domain) {
  switch (domain) {
    case GlyphDomain::kDigits:
      return 10;
    case GlyphDomain::kLetters:
      return 26;
    case GlyphDomain::kShapes:
      return kShapeCount;
  }
  return 0;
}

FloatImage render_glyph(GlyphDomain domain, int cls, InputShape shape, Rng& rng) {
  if (cls < 0 || cls >= glyph_class_count(domain))
    throw ValidationError("glyph class out of range");

  FloatImage base;
  switch (domain) {
    case GlyphDomain::kDigits:
      base = bitmap_to_float(kDigits[size_t(cls)]);
      break;
    case GlyphDomain::kLetters:
      base = bitmap_to_float(kLetters[size_t(cls)]);
      break;
    case GlyphDomain::kShapes:
      base = shape_bitmap(cls, rng);
      break;
  }

  // glyph occupies roughly 55..80% of the canvas height
  const double frac = rng.uniform(0.55, 0.80);
  const int gh = std::max(8, int(std::lround(shape.height * frac)));
  const int gw = std::max(6, int(std::lround(double(gh) * base.width / base.height)));
  const FloatImage scaled = resize_bilinear(base, gh, std::min(gw, shape.width));

  FloatImage canvas(shape.height, shape.width, 1);
  paste_centered(canvas, scaled);

  constexpr double kDegree = 3.14159265358979323846 / 180.0;
  const auto map = imgproc::make_affine(
      canvas.height, canvas.width, rng.uniform(-12.0, 12.0) * kDegree, rng.uniform(0.9, 1.1),
      rng.uniform(0.9, 1.1), rng.uniform(-8.0, 8.0) * kDegree,
      rng.uniform(-0.08, 0.08) * shape.width, rng.uniform(-0.08, 0.08) * shape.height);
  FloatImage img = imgproc::affine_warp(canvas, map);

  const float fg = float(rng.uniform(0.70, 1.0));
  for (auto& v : img.values) v *= fg;

  img = imgproc::gaussian_blur(img, rng.uniform(0.3, 1.0));

  const float bg = float(rng.uniform(0.02, 0.08));
  const double noise = rng.uniform(0.01, 0.05);
  for (auto& v : img.values) v += bg + float(rng.normal(0.0, noise));
  for (auto& v : img.values) v = std::clamp(v, 0.0f, 1.0f);

  if (shape.channels == 3) img = convert_channels(img, 3);
  return img;
}

DatasetManifest generate_glyph_corpus(GlyphDomain domain, int per_class, InputShape shape,
                                      uint64_t seed, const std::string& out_dir, bool labeled,
                                      int num_classes) {
  if (per_class < 1) throw ValidationError("per_class must be at least 1");
  const int domain_classes = glyph_class_count(domain);
  fs::create_directories(out_dir);

  DatasetManifest m;
  if (labeled) {
    m.split = Split::kPdd;
    m.label_source = LabelSource::kOl;
    m.num_classes = num_classes > 0 ? num_classes : domain_classes;
    if (m.num_classes < domain_classes)
      throw ValidationError("num_classes smaller than the domain's class count");
  } else {
    m.split = Split::kNpdd;
    m.label_source = LabelSource::kNone;
    if (num_classes < 2)
      throw ValidationError("surrogate pools need the problem's num_classes");
    m.num_classes = num_classes;
  }

  char name[48];
  for (int cls = 0; cls < domain_classes; ++cls) {
    Rng rng(derive_seed(seed, std::string("glyph-") + domain_prefix(domain) +
                                  std::to_string(cls)));
    for (int i = 0; i < per_class; ++i) {
      const FloatImage img = render_glyph(domain, cls, shape, rng);
      std::snprintf(name, sizeof(name), "%s%02d_%06d.png", domain_prefix(domain), cls, i);
      const std::string path = (fs::path(out_dir) / name).string();
      save_png(path, to_image(img));
      m.records.push_back({path, labeled ? std::optional<int>(cls) : std::nullopt});
    }
  }
  validate_manifest(m);
  return m;
}

DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b) {
  if (a.split != b.split || a.label_source != b.label_source || a.num_classes != b.num_classes)
    throw ValidationError("cannot merge manifests with different split/label_source/num_classes");
  DatasetManifest out = a;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

}  // namespace copycat
