#include "copycat/lrp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "copycat/image.hpp"
#include "copycat/network.hpp"

namespace copycat {
namespace {

double sign0(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// Distributes R_j over the contributions z_i (sum z plus the bias equals the
// neuron output). The bias share and the epsilon stabilizer are spread in
// proportion to |z_i| so the inputs receive exactly R_j in total; dead inputs
// (z_i == 0) stay at zero unless every contribution is zero.
void distribute(double r_j, const std::vector<double>& z, const std::vector<size_t>& idx,
                double bias, double epsilon, std::vector<double>& r_in) {
  if (r_j == 0.0) return;
  double z_sum = bias;
  double abs_sum = 0.0;
  for (const double v : z) {
    z_sum += v;
    abs_sum += std::abs(v);
  }
  const double denom = z_sum + epsilon * sign0(z_sum);
  const double residual = r_j * (bias + epsilon * sign0(z_sum)) / denom;
  if (abs_sum > 0.0) {
    for (size_t i = 0; i < z.size(); ++i)
      r_in[idx[i]] += r_j * z[i] / denom + residual * std::abs(z[i]) / abs_sum;
  } else {
    const double share = residual / double(z.size());
    for (size_t i = 0; i < z.size(); ++i) r_in[idx[i]] += share;
  }
}

}  // namespace

const char* agreement_name(Agreement a) {
  switch (a) {
    case Agreement::kBothCorrect: return "BOTH_CORRECT";
    case Agreement::kTargetOnly: return "TARGET_ONLY";
    case Agreement::kCopycatOnly: return "COPYCAT_ONLY";
    case Agreement::kBothWrong: return "BOTH_WRONG";
  }
  return "BOTH_WRONG";
}

Heatmap relevance(const Checkpoint& ckpt, const ImageTensor& image,
                  std::optional<int> class_index, double epsilon,
                  const std::string& image_ref) {
  if (epsilon <= 0.0) throw ValidationError("epsilon must be positive");
  Network<double> net(ckpt.spec, ckpt.blob, ckpt.mean_size);
  Trace<double> trace;
  const std::vector<double>& logits = net.forward(net.input_from(image), trace);

  int cls = 0;
  if (class_index) {
    cls = *class_index;
    if (cls < 0 || cls >= int(logits.size()))
      throw ValidationError("explained class index out of range");
  } else {
    cls = int(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }

  const auto& plan = net.plan();
  const auto& params = net.params();
  std::vector<double> r(logits.size(), 0.0);
  r[size_t(cls)] = logits[size_t(cls)];

  std::vector<double> z;
  std::vector<size_t> idx;
  for (size_t li = plan.size(); li-- > 0;) {
    const LayerPlan& l = plan[li];
    const std::vector<double>& x = trace.act[li];
    std::vector<double> r_in(x.size(), 0.0);
    switch (l.desc.kind) {
      case LayerKind::kDense: {
        const double* w = params.data() + l.w_off;
        const double* b = params.data() + l.b_off;
        z.resize(x.size());
        idx.resize(x.size());
        for (int j = 0; j < l.desc.out; ++j) {
          if (r[size_t(j)] == 0.0) continue;
          const double* row = w + size_t(j) * l.desc.in;
          for (size_t i = 0; i < x.size(); ++i) {
            z[i] = row[i] * x[i];
            idx[i] = i;
          }
          distribute(r[size_t(j)], z, idx, b[j], epsilon, r_in);
        }
        break;
      }
      case LayerKind::kConv: {
        const double* w = params.data() + l.w_off;
        const double* b = params.data() + l.b_off;
        for (int o = 0; o < l.out_c; ++o) {
          const double* filt = w + size_t(o) * l.in_c * 9;
          for (int oy = 0; oy < l.out_h; ++oy) {
            for (int ox = 0; ox < l.out_w; ++ox) {
              const double r_j = r[(size_t(o) * l.out_h + oy) * l.out_w + ox];
              if (r_j == 0.0) continue;
              z.clear();
              idx.clear();
              for (int c = 0; c < l.in_c; ++c) {
                for (int ky = 0; ky < 3; ++ky) {
                  const int sy = oy + ky - 1;
                  if (sy < 0 || sy >= l.in_h) continue;
                  for (int kx = 0; kx < 3; ++kx) {
                    const int sx = ox + kx - 1;
                    if (sx < 0 || sx >= l.in_w) continue;
                    const size_t xi = (size_t(c) * l.in_h + sy) * l.in_w + sx;
                    z.push_back(filt[size_t(c) * 9 + size_t(ky) * 3 + kx] * x[xi]);
                    idx.push_back(xi);
                  }
                }
              }
              distribute(r_j, z, idx, b[o], epsilon, r_in);
            }
          }
        }
        break;
      }
      case LayerKind::kRelu:
        r_in = r;
        break;
      case LayerKind::kMaxPool: {
        const std::vector<int>& arg = trace.pool_argmax[li];
        for (size_t o = 0; o < r.size(); ++o) r_in[size_t(arg[o])] += r[o];
        break;
      }
      default:
        throw UnsupportedLayerError("relevance propagation has no rule for this layer kind");
    }
    r = std::move(r_in);
  }

  Heatmap map;
  map.height = ckpt.spec.input_shape.height;
  map.width = ckpt.spec.input_shape.width;
  map.values.assign(size_t(map.height) * map.width, 0.0);
  const size_t hw = map.values.size();
  for (int c = 0; c < ckpt.spec.input_shape.channels; ++c)
    for (size_t i = 0; i < hw; ++i) map.values[i] += r[size_t(c) * hw + i];
  map.source_checkpoint = ckpt.content_hash;
  map.image_ref = image_ref;
  map.explained_class = cls;
  map.explained_score = logits[size_t(cls)];
  return map;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("heatmap sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  constexpr double kTiny = 1e-30;
  if (na < kTiny && nb < kTiny) return 1.0;
  if (na < kTiny || nb < kTiny) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

HeatmapComparison compare(const Checkpoint& target, const Checkpoint& copycat,
                          const ImageTensor& image, int truth, double epsilon,
                          const std::string& image_ref) {
  HeatmapComparison out;
  out.target_map = relevance(target, image, std::nullopt, epsilon, image_ref);
  out.copycat_map = relevance(copycat, image, std::nullopt, epsilon, image_ref);
  out.similarity = cosine_similarity(out.target_map.values, out.copycat_map.values);
  const bool t_ok = out.target_map.explained_class == truth;
  const bool c_ok = out.copycat_map.explained_class == truth;
  out.agreement = t_ok ? (c_ok ? Agreement::kBothCorrect : Agreement::kTargetOnly)
                       : (c_ok ? Agreement::kCopycatOnly : Agreement::kBothWrong);
  return out;
}

void write_heatmap_raw(const std::string& path_base, const Heatmap& map) {
  {
    std::ofstream os(path_base + ".f32", std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path_base + ".f32");
    std::vector<float> f(map.values.begin(), map.values.end());
    static_assert(std::endian::native == std::endian::little);
    os.write(reinterpret_cast<const char*>(f.data()),
             std::streamsize(f.size() * sizeof(float)));
    if (!os) throw IoError("write failed: " + path_base + ".f32");
  }
  nlohmann::json j{{"dtype", "float32"},
                   {"shape", {map.height, map.width}},
                   {"order", "row-major"},
                   {"endianness", "little"},
                   {"source_checkpoint", map.source_checkpoint},
                   {"image_ref", map.image_ref},
                   {"explained_class", map.explained_class},
                   {"explained_score", map.explained_score}};
  std::ofstream os(path_base + ".json");
  if (!os) throw IoError("cannot open for writing: " + path_base + ".json");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path_base + ".json");
}

void write_heatmap_png(const std::string& path, const Heatmap& map) {
  double max_abs = 0.0;
  for (const double v : map.values) max_abs = std::max(max_abs, std::abs(v));
  Image img;
  img.height = map.height;
  img.width = map.width;
  img.channels = 3;
  img.pixels.resize(img.pixel_count());
  for (size_t i = 0; i < map.values.size(); ++i) {
    const double t = max_abs > 0.0 ? map.values[i] / max_abs : 0.0;
    // Blue-white-red, white at zero.
    const double rr = t >= 0.0 ? 1.0 : 1.0 + t;
    const double gg = 1.0 - std::abs(t);
    const double bb = t <= 0.0 ? 1.0 : 1.0 - t;
    img.pixels[i * 3 + 0] = uint8_t(std::lround(std::clamp(rr, 0.0, 1.0) * 255.0));
    img.pixels[i * 3 + 1] = uint8_t(std::lround(std::clamp(gg, 0.0, 1.0) * 255.0));
    img.pixels[i * 3 + 2] = uint8_t(std::lround(std::clamp(bb, 0.0, 1.0) * 255.0));
  }
  save_png(path, img);
}

}  // namespace copycat
