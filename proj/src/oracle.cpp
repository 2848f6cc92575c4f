#include "copycat/oracle.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "copycat/network.hpp"

namespace copycat {

HardLabel harden(const SoftLabel& soft) {
  const auto& p = soft.probabilities;
  if (p.empty()) throw ValidationError("cannot harden an empty probability vector");
  double sum = 0.0;
  for (const float v : p) {
    if (!(v >= 0.0f && v <= 1.0f))
      throw ValidationError("probability outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("probabilities do not sum to 1");
  HardLabel out;
  out.class_index = 0;
  for (size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[size_t(out.class_index)]) out.class_index = int(i);
  out.one_hot.assign(p.size(), 0.0f);
  out.one_hot[size_t(out.class_index)] = 1.0f;
  return out;
}

struct Oracle::Backend {
  // LOCAL
  std::unique_ptr<Network<float>> net;
  // REMOTE
  std::string host_port;
  RemoteOptions options;

  HardLabel predict(std::span<const uint8_t> png_bytes, int num_classes) {
    if (net) {
      const Image img = decode_png(png_bytes);
      FloatImage f = to_float(img);
      const auto& shp = net->spec().input_shape;
      if (f.channels != shp.channels) f = convert_channels(f, shp.channels);
      if (f.height != shp.height || f.width != shp.width)
        f = resize_bilinear(f, shp.height, shp.width);
      return harden(net->predict_soft(f));
    }
    return predict_remote(png_bytes, num_classes);
  }

  HardLabel predict_remote(std::span<const uint8_t> png_bytes, int num_classes) {
    std::string last_error;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));
      }
      httplib::Client client(host_port);
      client.set_read_timeout(options.timeout_s, 0);
      client.set_connection_timeout(options.timeout_s, 0);
      auto res = client.Post("/v1/predict",
                             reinterpret_cast<const char*>(png_bytes.data()), png_bytes.size(),
                             "image/png");
      if (!res) {
        last_error = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) {
        try {
          const auto j = nlohmann::json::parse(res->body);
          const int label = j.at("label").get<int>();
          if (label < 0 || label >= num_classes)
            throw TransportError("oracle returned an out-of-range label");
          HardLabel out;
          out.class_index = label;
          out.one_hot.assign(size_t(num_classes), 0.0f);
          out.one_hot[size_t(label)] = 1.0f;
          return out;
        } catch (const nlohmann::json::exception& e) {
          throw TransportError("malformed oracle response: " + std::string(e.what()));
        }
      }
      if (res->status == 400 || res->status == 413)
        throw ValidationError("oracle rejected the image (HTTP " + std::to_string(res->status) +
                              ")");
      // 429 and 5xx are retryable
      last_error = "HTTP " + std::to_string(res->status);
    }
    throw TransportError("remote oracle unreachable after " +
                         std::to_string(options.retries + 1) + " attempts: " + last_error);
  }
};

Oracle::Oracle(std::string oracle_id, const Checkpoint& ckpt,
               std::optional<int64_t> budget_limit, Rational price_per_batch)
    : oracle_id_(std::move(oracle_id)),
      num_classes_(ckpt.spec.num_classes),
      limit_(budget_limit),
      price_(price_per_batch),
      backend_(std::make_unique<Backend>()) {
  if (limit_ && *limit_ < 0) throw ValidationError("budget limit must be nonnegative");
  backend_->net = std::make_unique<Network<float>>(ckpt.spec, ckpt.blob, ckpt.mean_size);
}

Oracle::Oracle(std::string oracle_id, const std::string& endpoint_url,
               std::optional<int64_t> budget_limit, Rational price_per_batch,
               RemoteOptions options)
    : oracle_id_(std::move(oracle_id)),
      limit_(budget_limit),
      price_(price_per_batch),
      backend_(std::make_unique<Backend>()) {
  if (limit_ && *limit_ < 0) throw ValidationError("budget limit must be nonnegative");
  backend_->host_port = endpoint_url;
  backend_->options = options;

  httplib::Client client(endpoint_url);
  client.set_read_timeout(options.timeout_s, 0);
  client.set_connection_timeout(options.timeout_s, 0);
  auto res = client.Get("/v1/info");
  if (!res || res->status != 200)
    throw TransportError("cannot fetch /v1/info from " + endpoint_url);
  try {
    num_classes_ = nlohmann::json::parse(res->body).at("num_classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError("malformed /v1/info response: " + std::string(e.what()));
  }
  if (num_classes_ < 2) throw TransportError("oracle reports fewer than 2 classes");
}

Oracle::~Oracle() = default;

bool Oracle::is_remote() const { return backend_->net == nullptr; }

void Oracle::reserve_slot() {
  std::lock_guard<std::mutex> lock(mu_);
  if (limit_ && used_ >= *limit_)
    throw BudgetExceededError("query budget exhausted (" + std::to_string(*limit_) + ")");
  ++used_;
}

void Oracle::release_slot() {
  std::lock_guard<std::mutex> lock(mu_);
  --used_;
}

HardLabel Oracle::query(std::span<const uint8_t> png_bytes) {
  reserve_slot();
  try {
    return backend_->predict(png_bytes, num_classes_);
  } catch (...) {
    // transport failures and rejected images are not charged
    release_slot();
    throw;
  }
}

HardLabel Oracle::query_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return query(bytes);
}

int64_t Oracle::used() const {
  std::lock_guard<std::mutex> lock(mu_);
  return used_;
}

Rational Oracle::accumulated_cost() const {
  std::lock_guard<std::mutex> lock(mu_);
  return price_ * Rational(used_) / Rational(1000);
}

}  // namespace copycat
