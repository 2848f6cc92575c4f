#include <algorithm>
#include <cmath>
#include <numeric>

#include "copycat/manifest.hpp"
#include "copycat/network.hpp"
#include "copycat/rng.hpp"

namespace copycat {

TrainingSet load_training_set(const DatasetManifest& manifest, const InputShape& shape) {
  validate_manifest(manifest);
  if (manifest.label_source == LabelSource::kNone)
    throw ValidationError("training needs a labeled manifest");
  TrainingSet set;
  set.images.reserve(manifest.records.size());
  set.labels.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    set.images.push_back(load_input_image(r.ref, shape));
    set.labels.push_back(*r.label);
  }
  return set;
}

Checkpoint train_in_memory(const Checkpoint& ckpt, const TrainingSet& data,
                           const TrainConfig& cfg, TrainStats* stats) {
  validate_spec(ckpt.spec);
  validate_train_config(cfg);
  const size_t n = data.images.size();
  if (n == 0) throw ValidationError("training set is empty");
  if (data.labels.size() != n) throw ValidationError("images/labels size mismatch");
  const int k = ckpt.spec.num_classes;
  for (const int label : data.labels)
    if (label < 0 || label >= k) throw ValidationError("training label out of range");

  // An existing stored mean is kept; subtract_mean on a mean-free checkpoint
  // computes one from this training set and appends it to the blob.
  std::vector<float> blob = ckpt.blob;
  size_t mean_size = ckpt.mean_size;
  if (cfg.subtract_mean && mean_size == 0) {
    const size_t px = data.images[0].values.size();
    std::vector<double> acc(px, 0.0);
    for (const auto& img : data.images) {
      if (img.values.size() != px) throw ValidationError("inconsistent image shapes");
      for (size_t i = 0; i < px; ++i) acc[i] += img.values[i];
    }
    for (size_t i = 0; i < px; ++i) blob.push_back(float(acc[i] / double(n)));
    mean_size = px;
  }

  Network<float> net(ckpt.spec, blob, mean_size);
  std::vector<float>& params = net.params();
  std::vector<float> velocity(params.size(), 0.0f);
  std::vector<float> grads(params.size(), 0.0f);

  const int iters_per_epoch = int((n + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size));
  const int step_iters = cfg.lr_step_iters > 0 ? cfg.lr_step_iters : 2 * iters_per_epoch;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Trace<float> trace;
  std::vector<float> probs;
  long iter = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t correct = 0;

    for (size_t start = 0; start < n; start += size_t(cfg.batch_size)) {
      const size_t stop = std::min(n, start + size_t(cfg.batch_size));
      const float inv_batch = 1.0f / float(stop - start);
      std::fill(grads.begin(), grads.end(), 0.0f);
      double batch_loss = 0.0;

      for (size_t s = start; s < stop; ++s) {
        const size_t i = order[s];
        const std::vector<float>& z = net.forward(net.input_from(data.images[i]), trace);
        softmax(z, probs);
        const int label = data.labels[i];
        batch_loss += -std::log(std::max(probs[size_t(label)], 1e-30f));
        const size_t arg =
            size_t(std::max_element(z.begin(), z.end()) - z.begin());
        if (int(arg) == label) ++correct;
        std::vector<float> dz = probs;
        dz[size_t(label)] -= 1.0f;
        for (auto& g : dz) g *= inv_batch;
        net.backward(trace, dz, grads);
      }

      if (!std::isfinite(batch_loss)) throw TrainingDivergedError("non-finite training loss");
      epoch_loss += batch_loss;

      const double lr = cfg.learning_rate * std::pow(cfg.lr_gamma, double(iter / step_iters));
      kernels::sgd_update(params.data(), velocity.data(), grads.data(), params.size(),
                          float(lr), float(cfg.momentum), float(cfg.weight_decay));
      ++iter;
    }

    if (stats) {
      stats->epoch_loss.push_back(epoch_loss / double(n));
      stats->epoch_accuracy.push_back(double(correct) / double(n));
    }
  }

  Checkpoint out;
  out.spec = ckpt.spec;
  out.train_config = cfg;
  out.epochs_completed = cfg.max_epochs;
  out.mean_size = mean_size;
  out.blob = params;
  out.blob.insert(out.blob.end(), net.mean().begin(), net.mean().end());
  out.content_hash = blob_hash(out.blob);
  return out;
}

Checkpoint train(const Checkpoint& ckpt, const DatasetManifest& data, const TrainConfig& cfg,
                 TrainStats* stats) {
  if (data.records.empty()) throw ValidationError("training manifest is empty");
  if (data.num_classes != ckpt.spec.num_classes)
    throw ValidationError("manifest num_classes does not match the model");
  return train_in_memory(ckpt, load_training_set(data, ckpt.spec.input_shape), cfg, stats);
}

}  // namespace copycat
