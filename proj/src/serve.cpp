#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "copycat/network.hpp"
#include "copycat/oracle.hpp"

namespace copycat {

namespace {
constexpr size_t kMaxImageBytes = 1 << 20;  // 1 MiB
}

struct OracleServer::Impl {
  Network<float> net;
  ServeOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<int64_t> served{0};
  std::atomic<uint64_t> request_counter{0};

  // token bucket for the optional rate limit
  std::mutex rate_mu;
  double tokens = 0.0;
  std::chrono::steady_clock::time_point last_refill = std::chrono::steady_clock::now();

  explicit Impl(const Checkpoint& ckpt, ServeOptions opts)
      : net(ckpt.spec, ckpt.blob, ckpt.mean_size), options(opts) {
    tokens = options.rate_limit_qps;
  }

  bool rate_limited() {
    if (options.rate_limit_qps <= 0.0) return false;
    std::lock_guard<std::mutex> lock(rate_mu);
    const auto now = std::chrono::steady_clock::now();
    const double dt = std::chrono::duration<double>(now - last_refill).count();
    last_refill = now;
    tokens = std::min(options.rate_limit_qps, tokens + dt * options.rate_limit_qps);
    if (tokens < 1.0) return true;
    tokens -= 1.0;
    return false;
  }

  void setup_routes() {
    server.set_payload_max_length(kMaxImageBytes + 4096);

    server.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
      const nlohmann::json j{{"num_classes", net.spec().num_classes}};
      res.set_content(j.dump(), "application/json");
    });

    server.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
      if (rate_limited()) {
        res.status = 429;
        res.set_content(R"({"error": "rate limited"})", "application/json");
        return;
      }
      if (req.body.size() > kMaxImageBytes) {
        res.status = 413;
        res.set_content(R"({"error": "image too large"})", "application/json");
        return;
      }
      if (req.get_header_value("Content-Type") != "image/png") {
        res.status = 400;
        res.set_content(R"({"error": "expected image/png"})", "application/json");
        return;
      }
      try {
        const Image img = decode_png(std::span<const uint8_t>(
            reinterpret_cast<const uint8_t*>(req.body.data()), req.body.size()));
        FloatImage f = to_float(img);
        const auto& shp = net.spec().input_shape;
        if (f.channels != shp.channels) f = convert_channels(f, shp.channels);
        if (f.height != shp.height || f.width != shp.width)
          f = resize_bilinear(f, shp.height, shp.width);
        const HardLabel hard = harden(net.predict_soft(f));
        char rid[24];
        std::snprintf(rid, sizeof(rid), "%016llx",
                      static_cast<unsigned long long>(request_counter.fetch_add(1) + 1));
        const nlohmann::json j{{"label", hard.class_index}, {"request_id", rid}};
        res.set_content(j.dump(), "application/json");
        served.fetch_add(1);
      } catch (const IoError&) {
        res.status = 400;
        res.set_content(R"({"error": "malformed image"})", "application/json");
      } catch (const std::exception&) {
        res.status = 500;
        res.set_content(R"({"error": "internal"})", "application/json");
      }
    });
  }
};

OracleServer::OracleServer(const Checkpoint& ckpt, ServeOptions options)
    : impl_(std::make_unique<Impl>(ckpt, options)) {
  impl_->setup_routes();
}

OracleServer::~OracleServer() { stop(); }

void OracleServer::start(const std::string& host, int port) {
  if (impl_->thread.joinable()) throw ValidationError("server already running");
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw IoError("cannot bind oracle server on " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw IoError("cannot bind oracle server on " + host + ":" + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void OracleServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int64_t OracleServer::requests_served() const { return impl_->served.load(); }

}  // namespace copycat
