#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <filesystem>

#include "copycat/image.hpp"
#include "copycat/manifest.hpp"
#include "copycat/model.hpp"
#include "copycat/oracle.hpp"
#include "copycat/rng.hpp"

#include <json.hpp>

using namespace copycat;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> random_png(uint64_t seed, int h = 8, int w = 8) {
  Image img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.assign(img.pixel_count(), 0);
  Rng rng(seed);
  for (auto& p : img.pixels) p = uint8_t(rng.below(256));
  return encode_png(img);
}

Checkpoint tiny_target() { return build_model(small_spec(4, {8, 8, 1}), 123); }

}  // namespace

TEST_CASE("harden picks the argmax with lowest-index ties") {
  CHECK(harden({{0.1f, 0.7f, 0.2f}}).class_index == 1);
  CHECK(harden({{0.5f, 0.5f}}).class_index == 0);  // tie -> lowest index
  CHECK(harden({{0.25f, 0.25f, 0.25f, 0.25f}}).class_index == 0);
  CHECK(harden({{1.0f, 0.0f}}).class_index == 0);
  CHECK(harden({{0.0f, 0.0f, 1.0f}}).class_index == 2);

  const HardLabel h = harden({{0.2f, 0.3f, 0.5f}});
  REQUIRE(h.one_hot.size() == 3);
  CHECK(h.one_hot[0] == 0.0f);
  CHECK(h.one_hot[1] == 0.0f);
  CHECK(h.one_hot[2] == 1.0f);

  CHECK_THROWS_AS(harden({{}}), ValidationError);
  CHECK_THROWS_AS(harden({{0.6f, 0.6f}}), ValidationError);     // sums past 1
  CHECK_THROWS_AS(harden({{0.2f, 0.2f}}), ValidationError);     // sums short of 1
  CHECK_THROWS_AS(harden({{1.2f, -0.2f}}), ValidationError);    // out of range
}

TEST_CASE("local oracle determinism and budget accounting") {
  const Checkpoint ckpt = tiny_target();
  Oracle oracle("unit-oracle", ckpt, 5, Rational::parse("2.00"));
  CHECK(oracle.num_classes() == 4);
  CHECK(oracle.oracle_id() == "unit-oracle");
  CHECK_FALSE(oracle.is_remote());
  REQUIRE(oracle.limit().has_value());
  CHECK(*oracle.limit() == 5);

  const std::vector<uint8_t> png = random_png(1);
  const HardLabel first = oracle.query(png);
  CHECK(first.class_index >= 0);
  CHECK(first.class_index < 4);
  for (int i = 0; i < 3; ++i) CHECK(oracle.query(png).class_index == first.class_index);
  CHECK(oracle.used() == 4);

  // The label matches what the checkpoint itself would predict.
  const std::string probe = "oracle_probe_test.png";
  {
    std::FILE* f = std::fopen(probe.c_str(), "wb");
    std::fwrite(png.data(), 1, png.size(), f);
    std::fclose(f);
  }
  const SoftLabel soft = predict_soft(ckpt, load_input_image(probe, ckpt.spec.input_shape));
  fs::remove(probe);
  int arg = 0;
  for (size_t c = 1; c < soft.probabilities.size(); ++c)
    if (soft.probabilities[c] > soft.probabilities[arg]) arg = int(c);
  CHECK(first.class_index == arg);

  // Budget: the fifth query lands, the sixth is refused without being run.
  CHECK_NOTHROW(oracle.query(png));
  CHECK(oracle.used() == 5);
  CHECK_THROWS_AS(oracle.query(png), BudgetExceededError);
  CHECK(oracle.used() == 5);  // refused query never consumed a slot

  // 5 queries at $2.00 per thousand.
  CHECK(oracle.accumulated_cost() == Rational::parse("0.01"));
}

TEST_CASE("cost accumulates exactly at scale") {
  // No need to run a million queries; the arithmetic is what is under test.
  const Checkpoint ckpt = tiny_target();
  Oracle oracle("bulk", ckpt, std::nullopt, Rational::parse("$1.00"));
  const std::vector<uint8_t> png = random_png(2);
  for (int i = 0; i < 1000; ++i) oracle.query(png);
  CHECK(oracle.used() == 1000);
  CHECK(oracle.accumulated_cost() == Rational::parse("1.00"));
  CHECK(oracle.accumulated_cost().to_decimal_string() == "1.00");
}

TEST_CASE("malformed png is rejected and not charged") {
  Oracle oracle("strict", tiny_target(), 10, Rational::parse("1.00"));
  const std::vector<uint8_t> junk = {'n', 'o', 't', ' ', 'p', 'n', 'g'};
  CHECK_THROWS(oracle.query(junk));
  CHECK(oracle.used() == 0);
}

TEST_CASE("query_file reads from disk") {
  Oracle oracle("filey", tiny_target(), std::nullopt, Rational::parse("0"));
  const std::vector<uint8_t> png = random_png(3);
  const std::string path = "oracle_query_test.png";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(png.data(), 1, png.size(), f);
    std::fclose(f);
  }
  const HardLabel from_file = oracle.query_file(path);
  const HardLabel from_bytes = oracle.query(png);
  CHECK(from_file.class_index == from_bytes.class_index);
  CHECK_THROWS_AS(oracle.query_file("definitely_absent.png"), IoError);
  fs::remove(path);
}

TEST_CASE("wire protocol") {
  const Checkpoint ckpt = tiny_target();
  OracleServer server(ckpt);
  server.start("127.0.0.1", 0);
  REQUIRE(server.port() > 0);
  httplib::Client client("127.0.0.1", server.port());

  SUBCASE("info exposes only the class count") {
    const auto res = client.Get("/v1/info");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json j = json::parse(res->body);
    CHECK(j.at("num_classes") == 4);
    CHECK(j.size() == 1);
  }

  SUBCASE("predict returns label and request id, nothing else") {
    const std::vector<uint8_t> png = random_png(4);
    const auto res = client.Post("/v1/predict", reinterpret_cast<const char*>(png.data()),
                                 png.size(), "image/png");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json j = json::parse(res->body);
    REQUIRE(j.contains("label"));
    REQUIRE(j.contains("request_id"));
    CHECK(j.size() == 2);  // hard label only; no probabilities, no metadata
    const int label = j.at("label").get<int>();
    CHECK(label >= 0);
    CHECK(label < 4);
    CHECK(j.at("request_id").get<std::string>().size() > 0);
  }

  SUBCASE("wrong content type is a 400") {
    const auto res = client.Post("/v1/predict", "hello", "text/plain");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("malformed png is a 400") {
    const auto res = client.Post("/v1/predict", "not a png at all", "image/png");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("oversized body is a 413") {
    std::string body(size_t(1) << 21, 'x');  // 2 MiB of junk
    const auto res = client.Post("/v1/predict", body, "image/png");
    REQUIRE(res);
    CHECK(res->status == 413);
  }

  server.stop();
}

TEST_CASE("rate limiting answers 429 when pushed") {
  OracleServer server(tiny_target(), ServeOptions{.rate_limit_qps = 2.0});
  server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", server.port());
  const std::vector<uint8_t> png = random_png(5);
  int limited = 0, ok = 0;
  for (int i = 0; i < 12; ++i) {
    const auto res = client.Post("/v1/predict", reinterpret_cast<const char*>(png.data()),
                                 png.size(), "image/png");
    REQUIRE(res);
    if (res->status == 429) ++limited;
    if (res->status == 200) ++ok;
  }
  CHECK(limited > 0);  // a 2 qps limit cannot absorb a burst of 12
  CHECK(ok > 0);
  server.stop();
}

TEST_CASE("remote oracle speaks the protocol end to end") {
  const Checkpoint ckpt = tiny_target();
  OracleServer server(ckpt);
  server.start("127.0.0.1", 0);
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(server.port());

  Oracle remote("remote-test", endpoint, 3, Rational::parse("1.00"));
  CHECK(remote.is_remote());
  CHECK(remote.num_classes() == 4);  // fetched from /v1/info

  Oracle local("local-twin", ckpt, std::nullopt, Rational::parse("1.00"));
  for (uint64_t s = 10; s < 13; ++s) {
    const std::vector<uint8_t> png = random_png(s);
    CHECK(remote.query(png).class_index == local.query(png).class_index);
  }
  CHECK(remote.used() == 3);
  CHECK_THROWS_AS(remote.query(random_png(20)), BudgetExceededError);

  // Transport failures are not charged: a malformed body bounces with 400.
  Oracle remote2("remote-400", endpoint, 10, Rational::parse("1.00"));
  CHECK_THROWS(remote2.query(std::vector<uint8_t>{1, 2, 3}));
  CHECK(remote2.used() == 0);

  server.stop();

  // Server gone: queries fail, nothing is charged.
  CHECK_THROWS_AS(remote2.query(random_png(21)), TransportError);
  CHECK(remote2.used() == 0);
}
