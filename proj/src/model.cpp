#include "copycat/model.hpp"

#include <cstring>

#include "copycat/network.hpp"
#include "copycat/rng.hpp"
#include "copycat/sha256.hpp"

namespace copycat {

namespace {

LayerDesc conv(int in, int out) { return {LayerKind::kConv, in, out}; }
LayerDesc relu() { return {LayerKind::kRelu, 0, 0}; }
LayerDesc pool() { return {LayerKind::kMaxPool, 0, 0}; }
LayerDesc dense(int in, int out) { return {LayerKind::kDense, in, out}; }

}  // namespace

ModelSpec large_spec(int num_classes, InputShape input) {
  ModelSpec spec;
  spec.name = "large";
  spec.arch = Arch::kLarge;
  spec.input_shape = input;
  spec.num_classes = num_classes;
  const int c = input.channels;
  const int fh = input.height / 16, fw = input.width / 16;
  const int flat = 64 * fh * fw;
  spec.layers = {conv(c, 8),   relu(), pool(), conv(8, 16),  relu(), pool(),
                 conv(16, 32), relu(), pool(), conv(32, 64), relu(), pool(),
                 dense(flat, 256), relu(), dense(256, num_classes)};
  validate_spec(spec);
  return spec;
}

ModelSpec small_spec(int num_classes, InputShape input) {
  ModelSpec spec;
  spec.name = "small";
  spec.arch = Arch::kSmall;
  spec.input_shape = input;
  spec.num_classes = num_classes;
  const int c = input.channels;
  const int fh = input.height / 4, fw = input.width / 4;
  const int flat = 16 * fh * fw;
  spec.layers = {conv(c, 8), relu(), pool(), conv(8, 16), relu(), pool(),
                 dense(flat, num_classes)};
  validate_spec(spec);
  return spec;
}

std::vector<LayerPlan> plan_layers(const ModelSpec& spec) {
  if (spec.num_classes < 2) throw ValidationError("num_classes must be at least 2");
  if (spec.input_shape.height < 1 || spec.input_shape.width < 1)
    throw ValidationError("input shape must be positive");
  if (spec.input_shape.channels != 1 && spec.input_shape.channels != 3)
    throw ValidationError("input channels must be 1 or 3");
  if (spec.layers.empty()) throw ValidationError("layer list is empty");

  std::vector<LayerPlan> plan;
  int c = spec.input_shape.channels;
  int h = spec.input_shape.height;
  int w = spec.input_shape.width;
  size_t off = 0;
  for (const LayerDesc& d : spec.layers) {
    LayerPlan l;
    l.desc = d;
    l.in_c = c;
    l.in_h = h;
    l.in_w = w;
    switch (d.kind) {
      case LayerKind::kConv:
        if (h < 1 || w < 1) throw ValidationError("conv layer on empty spatial input");
        if (d.in != c) throw ValidationError("conv in_channels does not match input");
        if (d.out < 1) throw ValidationError("conv out_channels must be positive");
        l.out_c = d.out;
        l.out_h = h;
        l.out_w = w;
        l.w_count = size_t(d.out) * d.in * 9;
        l.b_count = size_t(d.out);
        break;
      case LayerKind::kRelu:
        l.out_c = c;
        l.out_h = h;
        l.out_w = w;
        break;
      case LayerKind::kMaxPool:
        if (h % 2 != 0 || w % 2 != 0)
          throw ValidationError("maxpool input dimensions must be even");
        l.out_c = c;
        l.out_h = h / 2;
        l.out_w = w / 2;
        break;
      case LayerKind::kDense: {
        const int flat = c * h * w;
        if (d.in != flat) throw ValidationError("dense in_features does not match input");
        if (d.out < 1) throw ValidationError("dense out_features must be positive");
        l.in_c = flat;
        l.in_h = 1;
        l.in_w = 1;
        l.out_c = d.out;
        l.out_h = 1;
        l.out_w = 1;
        l.w_count = size_t(d.out) * d.in;
        l.b_count = size_t(d.out);
        break;
      }
    }
    l.w_off = off;
    off += l.w_count;
    l.b_off = off;
    off += l.b_count;
    c = l.out_c;
    h = l.out_h;
    w = l.out_w;
    plan.push_back(l);
  }
  if (plan.back().desc.kind != LayerKind::kDense)
    throw ValidationError("final layer must be dense");
  if (plan.back().desc.out != spec.num_classes)
    throw ValidationError("final layer must emit num_classes logits");
  return plan;
}

int feature_layer_index(const std::vector<LayerPlan>& plan) {
  int last_dense = -1;
  for (size_t i = 0; i < plan.size(); ++i)
    if (plan[i].desc.kind == LayerKind::kDense) last_dense = int(i);
  for (int i = last_dense - 1; i >= 0; --i)
    if (plan[i].desc.kind == LayerKind::kRelu) return i;
  return -1;
}

void validate_spec(const ModelSpec& spec) { plan_layers(spec); }

size_t parameter_count(const ModelSpec& spec) {
  size_t total = 0;
  for (const auto& l : plan_layers(spec)) total += l.w_count + l.b_count;
  return total;
}

int feature_dim(const ModelSpec& spec) {
  const auto plan = plan_layers(spec);
  const int fl = feature_layer_index(plan);
  if (fl < 0) throw ValidationError("architecture has no ReLU before the final dense layer");
  return int(plan[size_t(fl)].out_size());
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0) throw ValidationError("learning rate must be positive");
  if (cfg.momentum < 0 || cfg.momentum >= 1) throw ValidationError("momentum must be in [0,1)");
  if (cfg.weight_decay < 0) throw ValidationError("weight decay must be nonnegative");
  if (cfg.lr_gamma <= 0 || cfg.lr_gamma > 1) throw ValidationError("lr gamma must be in (0,1]");
  if (cfg.lr_step_iters < 0) throw ValidationError("lr step must be nonnegative");
  if (cfg.max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be at least 1");
}

std::string blob_hash(const std::vector<float>& blob) {
  static_assert(sizeof(float) == 4);
  return sha256_hex(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(blob.data()), blob.size() * sizeof(float)));
}

Checkpoint build_model(const ModelSpec& spec, uint64_t seed) {
  const auto plan = plan_layers(spec);
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.epochs_completed = 0;
  size_t total = 0;
  for (const auto& l : plan) total += l.w_count + l.b_count;
  ckpt.blob.assign(total, 0.0f);
  Rng rng(derive_seed(seed, "init"));
  for (const auto& l : plan) {
    if (l.w_count == 0) continue;
    const int fan_in = l.desc.kind == LayerKind::kConv ? l.desc.in * 9 : l.desc.in;
    const double stddev = std::sqrt(2.0 / fan_in);
    for (size_t i = 0; i < l.w_count; ++i)
      ckpt.blob[l.w_off + i] = float(rng.normal(0.0, stddev));
    // biases stay zero
  }
  ckpt.content_hash = blob_hash(ckpt.blob);
  return ckpt;
}

SoftLabel predict_soft(const Checkpoint& ckpt, const ImageTensor& image) {
  Network<float> net(ckpt.spec, ckpt.blob, ckpt.mean_size);
  return net.predict_soft(image);
}

std::vector<float> extract_features(const Checkpoint& ckpt, const ImageTensor& image) {
  Network<float> net(ckpt.spec, ckpt.blob, ckpt.mean_size);
  return net.extract_features(image);
}

}  // namespace copycat
