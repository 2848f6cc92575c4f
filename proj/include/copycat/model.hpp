#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "copycat/image.hpp"
#include "copycat/labels.hpp"

namespace copycat {

// Input to the nets; planar float32 in [0,1] unless a stored mean was subtracted.
using ImageTensor = FloatImage;

enum class Arch { kLarge, kSmall };

enum class LayerKind { kConv, kRelu, kMaxPool, kDense };

// Conv is always 3x3, stride 1, pad 1. MaxPool is always 2x2, stride 2.
// Dense flattens its input if it follows a spatial layer.
struct LayerDesc {
  LayerKind kind;
  int in = 0;   // conv: in channels, dense: in features
  int out = 0;  // conv: out channels, dense: out features
};

struct InputShape {
  int height = 32;
  int width = 32;
  int channels = 1;
};

struct ModelSpec {
  std::string name;
  Arch arch = Arch::kSmall;
  InputShape input_shape;
  int num_classes = 0;
  std::vector<LayerDesc> layers;
};

// Two fixed desk-scale architectures. The large one keeps a strict capacity
// margin over the small one across the class counts this artifact targets.
//   large: 4 x (conv3x3-relu-maxpool2), channels 8/16/32/64, dense 256, relu, dense K
//   small: 2 x (conv3x3-relu-maxpool2), channels 8/16, dense K
ModelSpec large_spec(int num_classes, InputShape input = {});
ModelSpec small_spec(int num_classes, InputShape input = {});

// Throws ValidationError on inconsistent layer shapes, K < 2, or a final
// layer that does not emit exactly num_classes logits.
void validate_spec(const ModelSpec& spec);

size_t parameter_count(const ModelSpec& spec);

// Width of the activation vector of the last ReLU before the final dense.
int feature_dim(const ModelSpec& spec);

enum class Loss { kCrossEntropy };

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Multiply the learning rate by lr_gamma every lr_step_iters optimizer
  // steps; 0 resolves to two epochs' worth of iterations at train time.
  int lr_step_iters = 0;
  double lr_gamma = 0.1;
  int max_epochs = 10;
  int batch_size = 32;
  uint64_t seed = 1;
  Loss loss = Loss::kCrossEntropy;
  // Target-side option only; copycat training never subtracts a mean.
  bool subtract_mean = false;
};

void validate_train_config(const TrainConfig& cfg);

// Weight blob layout: layers in spec order; conv = [out][in][3][3] weights
// then [out] biases; dense = [out][in] weights then [out] biases; all
// float32 little-endian. If mean_size > 0 the training-set mean image
// (h*w*c floats) follows the parameters. content_hash is the hex SHA-256
// of the raw blob bytes.
struct Checkpoint {
  ModelSpec spec;
  TrainConfig train_config;
  int epochs_completed = 0;
  std::vector<float> blob;
  size_t mean_size = 0;
  std::string content_hash;

  size_t param_count() const { return blob.size() - mean_size; }
};

std::string blob_hash(const std::vector<float>& blob);

// He-normal weights, zero biases, drawn from a stream seeded by `seed` alone.
Checkpoint build_model(const ModelSpec& spec, uint64_t seed);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct TrainingSet {
  std::vector<FloatImage> images;
  std::vector<int> labels;
};

struct TrainStats {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
};

// SGD with momentum, weight decay, and a step-down learning-rate policy.
// Deterministic for fixed (ckpt, data, cfg): shuffling and batching are
// driven by cfg.seed only. Throws TrainingDivergedError on non-finite loss.
Checkpoint train_in_memory(const Checkpoint& ckpt, const TrainingSet& data,
                           const TrainConfig& cfg, TrainStats* stats = nullptr);

struct DatasetManifest;

// Loads every referenced image, resized and channel-converted to `shape`.
TrainingSet load_training_set(const DatasetManifest& manifest, const InputShape& shape);

Checkpoint train(const Checkpoint& ckpt, const DatasetManifest& data, const TrainConfig& cfg,
                 TrainStats* stats = nullptr);

SoftLabel predict_soft(const Checkpoint& ckpt, const ImageTensor& image);
std::vector<float> extract_features(const Checkpoint& ckpt, const ImageTensor& image);

}  // namespace copycat
