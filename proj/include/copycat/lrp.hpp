#pragma once

#include <optional>
#include <string>
#include <vector>

#include "copycat/model.hpp"

namespace copycat {

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // channel-summed, row-major
  std::string source_checkpoint;
  std::string image_ref;
  int explained_class = 0;
  double explained_score = 0.0;
};

// Epsilon-rule relevance propagation (dense, conv, ReLU pass-through,
// max-pool winner-takes-all), computed in double precision. The bias share
// and the epsilon stabilizer are redistributed across the layer's inputs in
// proportion to |contribution|, so the returned map sums to the explained
// logit up to rounding. class_index defaults to the predicted class.
Heatmap relevance(const Checkpoint& ckpt, const ImageTensor& image,
                  std::optional<int> class_index = std::nullopt, double epsilon = 1e-6,
                  const std::string& image_ref = "");

enum class Agreement { kBothCorrect, kTargetOnly, kCopycatOnly, kBothWrong };

const char* agreement_name(Agreement a);

struct HeatmapComparison {
  double similarity = 0.0;  // cosine over flattened maps
  Agreement agreement = Agreement::kBothWrong;
  Heatmap target_map;
  Heatmap copycat_map;
};

// Each model explains its own predicted class; agreement is judged against
// `truth`. Two all-zero maps compare at 1, one all-zero map at 0.
HeatmapComparison compare(const Checkpoint& target, const Checkpoint& copycat,
                          const ImageTensor& image, int truth, double epsilon = 1e-6,
                          const std::string& image_ref = "");

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// path_base + ".f32": raw float32 little-endian, row-major.
// path_base + ".json": shape and provenance sidecar.
void write_heatmap_raw(const std::string& path_base, const Heatmap& map);
// Diverging color scale (blue-white-red) centered at zero, max-abs scaled.
void write_heatmap_png(const std::string& path, const Heatmap& map);

}  // namespace copycat
