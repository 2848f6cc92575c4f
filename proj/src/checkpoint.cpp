#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "copycat/model.hpp"
#include "copycat/serialize.hpp"

// File format: [u32 LE header length][UTF-8 JSON header][float32 LE blob].
// The header records spec, train_config, epochs_completed, mean_size, and
// content_hash; the loader recomputes the hash and rejects mismatches.
static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace copycat {

using nlohmann::json;

void to_json(json& j, const InputShape& s) {
  j = json{{"height", s.height}, {"width", s.width}, {"channels", s.channels}};
}

void from_json(const json& j, InputShape& s) {
  j.at("height").get_to(s.height);
  j.at("width").get_to(s.width);
  j.at("channels").get_to(s.channels);
}

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kRelu:
      return "relu";
    case LayerKind::kMaxPool:
      return "maxpool";
    case LayerKind::kDense:
      return "dense";
  }
  throw ValidationError("unknown layer kind");
}

LayerKind kind_from(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "maxpool") return LayerKind::kMaxPool;
  if (s == "dense") return LayerKind::kDense;
  throw ValidationError("unknown layer kind: " + s);
}

}  // namespace

void to_json(json& j, const LayerDesc& d) {
  j = json{{"kind", kind_name(d.kind)}};
  if (d.kind == LayerKind::kConv || d.kind == LayerKind::kDense) {
    j["in"] = d.in;
    j["out"] = d.out;
  }
}

void from_json(const json& j, LayerDesc& d) {
  d.kind = kind_from(j.at("kind").get<std::string>());
  d.in = j.value("in", 0);
  d.out = j.value("out", 0);
}

void to_json(json& j, const ModelSpec& s) {
  j = json{{"name", s.name},
           {"arch", s.arch == Arch::kLarge ? "large" : "small"},
           {"input_shape", s.input_shape},
           {"num_classes", s.num_classes},
           {"layers", s.layers}};
}

void from_json(const json& j, ModelSpec& s) {
  j.at("name").get_to(s.name);
  const std::string arch = j.at("arch").get<std::string>();
  if (arch == "large")
    s.arch = Arch::kLarge;
  else if (arch == "small")
    s.arch = Arch::kSmall;
  else
    throw ValidationError("unknown arch: " + arch);
  j.at("input_shape").get_to(s.input_shape);
  j.at("num_classes").get_to(s.num_classes);
  j.at("layers").get_to(s.layers);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"lr_step_iters", c.lr_step_iters},
           {"lr_gamma", c.lr_gamma},
           {"max_epochs", c.max_epochs},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"loss", "cross_entropy"},
           {"subtract_mean", c.subtract_mean}};
}

void from_json(const json& j, TrainConfig& c) {
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("momentum").get_to(c.momentum);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("lr_step_iters").get_to(c.lr_step_iters);
  j.at("lr_gamma").get_to(c.lr_gamma);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("seed").get_to(c.seed);
  if (j.value("loss", "cross_entropy") != "cross_entropy")
    throw ValidationError("unknown loss");
  c.loss = Loss::kCrossEntropy;
  c.subtract_mean = j.value("subtract_mean", false);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  if (ckpt.content_hash != blob_hash(ckpt.blob))
    throw ValidationError("checkpoint content_hash does not match its blob");
  json header{{"spec", ckpt.spec},
              {"train_config", ckpt.train_config},
              {"epochs_completed", ckpt.epochs_completed},
              {"mean_size", ckpt.mean_size},
              {"content_hash", ckpt.content_hash}};
  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  const uint32_t len = uint32_t(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), std::streamsize(head.size()));
  out.write(reinterpret_cast<const char*>(ckpt.blob.data()),
            std::streamsize(ckpt.blob.size() * sizeof(float)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in || len == 0 || len > (64u << 20)) throw IoError("corrupt checkpoint header: " + path);
  std::string head(len, '\0');
  in.read(head.data(), std::streamsize(len));
  if (!in) throw IoError("truncated checkpoint header: " + path);

  json j;
  try {
    j = json::parse(head);
  } catch (const json::exception& e) {
    throw IoError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  try {
    j.at("spec").get_to(ckpt.spec);
    j.at("train_config").get_to(ckpt.train_config);
    j.at("epochs_completed").get_to(ckpt.epochs_completed);
    ckpt.mean_size = j.value("mean_size", size_t(0));
    j.at("content_hash").get_to(ckpt.content_hash);
  } catch (const json::exception& e) {
    throw IoError("checkpoint header missing fields: " + std::string(e.what()));
  }
  validate_spec(ckpt.spec);

  const size_t expect = parameter_count(ckpt.spec) + ckpt.mean_size;
  ckpt.blob.resize(expect);
  in.read(reinterpret_cast<char*>(ckpt.blob.data()), std::streamsize(expect * sizeof(float)));
  if (!in || size_t(in.gcount()) != expect * sizeof(float))
    throw IoError("checkpoint blob is truncated: " + path);
  char extra;
  if (in.read(&extra, 1), in.gcount() != 0)
    throw IoError("checkpoint has trailing bytes: " + path);

  if (blob_hash(ckpt.blob) != ckpt.content_hash)
    throw IoError("checkpoint content hash mismatch: " + path);
  return ckpt;
}

}  // namespace copycat
