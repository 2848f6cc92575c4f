#include <algorithm>
#include <cmath>
#include <filesystem>

#include "copycat/manifest.hpp"
#include "copycat/rng.hpp"

namespace fs = std::filesystem;

namespace copycat {

const std::vector<std::string> kAugmentationOps = {
    "add_sub_intensity", "contrast_normalization",
    "crop",              "horizontal_flip",
    "gaussian_blur",     "gaussian_noise",
    "piecewise_affine",  "rotate",
    "scale",             "sharpen",
    "shear",             "translate",
};

namespace {

constexpr double kDegree = 3.14159265358979323846 / 180.0;

// Default magnitude ranges; the operation names come from the fixed list
// above and anything else is rejected.
FloatImage apply_op(const FloatImage& in, const std::string& op, Rng& rng) {
  if (op == "add_sub_intensity") {
    FloatImage out = in;
    imgproc::add_intensity(out, rng.uniform(-0.15, 0.15));
    return out;
  }
  if (op == "contrast_normalization") {
    FloatImage out = in;
    imgproc::adjust_contrast(out, rng.uniform(0.8, 1.25));
    return out;
  }
  if (op == "crop") {
    const int max_dy = std::max(1, in.height / 10), max_dx = std::max(1, in.width / 10);
    const int y0 = int(rng.below(uint64_t(max_dy)));
    const int x0 = int(rng.below(uint64_t(max_dx)));
    const int y1 = in.height - int(rng.below(uint64_t(max_dy)));
    const int x1 = in.width - int(rng.below(uint64_t(max_dx)));
    return imgproc::crop_resize(in, y0, x0, y1 - y0, x1 - x0);
  }
  if (op == "horizontal_flip") {
    FloatImage out = in;
    if (rng.below(2) == 1) imgproc::hflip(out);
    return out;
  }
  if (op == "gaussian_blur") return imgproc::gaussian_blur(in, rng.uniform(0.0, 1.5));
  if (op == "gaussian_noise") {
    FloatImage out = in;
    imgproc::add_gaussian_noise(out, rng.uniform(0.0, 0.05), rng);
    return out;
  }
  if (op == "piecewise_affine")
    return imgproc::piecewise_affine(in, 4, rng.uniform(0.0, 0.04) * std::min(in.height, in.width),
                                     rng);
  if (op == "rotate") {
    const auto map = imgproc::make_affine(in.height, in.width, rng.uniform(-15.0, 15.0) * kDegree,
                                          1.0, 1.0, 0.0, 0.0, 0.0);
    return imgproc::affine_warp(in, map);
  }
  if (op == "scale") {
    const auto map = imgproc::make_affine(in.height, in.width, 0.0, rng.uniform(0.9, 1.1),
                                          rng.uniform(0.9, 1.1), 0.0, 0.0, 0.0);
    return imgproc::affine_warp(in, map);
  }
  if (op == "sharpen") return imgproc::sharpen(in, 1.0, rng.uniform(0.0, 0.8));
  if (op == "shear") {
    const auto map = imgproc::make_affine(in.height, in.width, 0.0, 1.0, 1.0,
                                          rng.uniform(-8.0, 8.0) * kDegree, 0.0, 0.0);
    return imgproc::affine_warp(in, map);
  }
  if (op == "translate") {
    const auto map =
        imgproc::make_affine(in.height, in.width, 0.0, 1.0, 1.0, 0.0,
                             rng.uniform(-0.1, 0.1) * in.width, rng.uniform(-0.1, 0.1) * in.height);
    return imgproc::affine_warp(in, map);
  }
  throw ValidationError("unknown augmentation op: " + op);
}

}  // namespace

DatasetManifest augment(const DatasetManifest& manifest, const std::vector<std::string>& ops,
                        int multiplier, uint64_t seed, const std::string& out_dir) {
  validate_manifest(manifest);
  if (multiplier < 1) throw ValidationError("augment multiplier must be at least 1");
  for (const auto& op : ops)
    if (std::find(kAugmentationOps.begin(), kAugmentationOps.end(), op) == kAugmentationOps.end())
      throw ValidationError("unknown augmentation op: " + op);

  DatasetManifest out = manifest;
  if (multiplier == 1) return out;  // variant 0 is always the source image
  out.records.clear();

  fs::create_directories(out_dir);
  char name[48];
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    out.records.push_back(rec);
    Rng rng(derive_seed(seed, "augment-" + std::to_string(i)));
    const FloatImage src = to_float(load_png(rec.ref));
    for (int m = 1; m < multiplier; ++m) {
      FloatImage img = src;
      for (const auto& op : ops) img = apply_op(img, op, rng);
      std::snprintf(name, sizeof(name), "aug_%06zu_%02d.png", i, m);
      const std::string path = (fs::path(out_dir) / name).string();
      save_png(path, to_image(img));
      out.records.push_back({path, rec.label});
    }
  }
  return out;
}

}  // namespace copycat
