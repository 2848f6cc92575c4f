#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "copycat/labels.hpp"
#include "copycat/model.hpp"
#include "copycat/rational.hpp"

namespace copycat {

struct QueryBudget {
  std::optional<int64_t> limit;  // nullopt = unlimited
  int64_t used = 0;
};

struct RemoteOptions {
  int retries = 3;
  int backoff_ms = 100;  // doubled per retry
  int timeout_s = 10;
};

// The black-box boundary. Attackers hand PNG bytes in and get a hard label
// back; preprocessing, architecture, and soft labels stay on this side.
// query() is linearizable: a budget slot is reserved before the backend
// call and released if transport ultimately fails, so used counts exactly
// the successful queries.
class Oracle {
 public:
  // In-process backend wrapping a checkpoint.
  Oracle(std::string oracle_id, const Checkpoint& ckpt, std::optional<int64_t> budget_limit,
         Rational price_per_batch);
  // Remote backend speaking the wire protocol; fetches K from /v1/info.
  Oracle(std::string oracle_id, const std::string& endpoint_url,
         std::optional<int64_t> budget_limit, Rational price_per_batch,
         RemoteOptions options = {});
  ~Oracle();

  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  const std::string& oracle_id() const { return oracle_id_; }
  int num_classes() const { return num_classes_; }
  bool is_remote() const;

  HardLabel query(std::span<const uint8_t> png_bytes);
  HardLabel query_file(const std::string& path);

  int64_t used() const;
  std::optional<int64_t> limit() const { return limit_; }
  // used x price_per_batch / 1000, in exact arithmetic.
  Rational accumulated_cost() const;
  Rational price_per_batch() const { return price_; }

 private:
  struct Backend;
  void reserve_slot();
  void release_slot();

  std::string oracle_id_;
  int num_classes_ = 0;
  std::optional<int64_t> limit_;
  mutable std::mutex mu_;
  int64_t used_ = 0;
  Rational price_;
  std::unique_ptr<Backend> backend_;
};

struct ServeOptions {
  // Queries per second per connection source; 0 disables rate limiting.
  double rate_limit_qps = 0.0;
};

// HTTP service exposing a checkpoint as a hard-label oracle:
//   POST /v1/predict  body = PNG, Content-Type: image/png
//                     200 {"label": k, "request_id": hex} | 400 | 413 | 429 | 500
//   GET  /v1/info     200 {"num_classes": K}
// Responses never carry probabilities, parameters, or preprocessing detail.
class OracleServer {
 public:
  explicit OracleServer(const Checkpoint& ckpt, ServeOptions options = {});
  ~OracleServer();

  // Binds and serves on a background thread; port 0 picks a free port.
  void start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  int64_t requests_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace copycat
