#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "copycat/image.hpp"
#include "copycat/lrp.hpp"
#include "copycat/network.hpp"
#include "copycat/rng.hpp"

using namespace copycat;
namespace fs = std::filesystem;

namespace {

Checkpoint hand_checkpoint(const ModelSpec& spec, const std::vector<float>& blob) {
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.blob = blob;
  ckpt.mean_size = 0;
  ckpt.content_hash = blob_hash(blob);
  return ckpt;
}

ModelSpec micro_dense_spec() {
  ModelSpec s;
  s.name = "micro";
  s.arch = Arch::kSmall;
  s.input_shape = {2, 2, 1};
  s.num_classes = 2;
  s.layers = {{LayerKind::kDense, 4, 2}};
  validate_spec(s);
  return s;
}

FloatImage random_image(int h, int w, int c, uint64_t seed) {
  FloatImage img(h, w, c);
  Rng rng(seed);
  for (auto& v : img.values) v = float(rng.uniform());
  return img;
}

double heat_sum(const Heatmap& map) {
  double s = 0.0;
  for (const double v : map.values) s += v;
  return s;
}

// Checkpoint with small random biases so the bias share is actually nonzero.
Checkpoint biased_model(const ModelSpec& spec, uint64_t seed) {
  Checkpoint ckpt = build_model(spec, seed);
  Rng rng(seed + 100);
  for (const auto& l : plan_layers(spec))
    for (size_t i = 0; i < l.b_count; ++i)
      ckpt.blob[l.b_off + i] = float(rng.uniform(-0.1, 0.1));
  ckpt.content_hash = blob_hash(ckpt.blob);
  return ckpt;
}

}  // namespace

TEST_CASE("single dense layer matches a from-scratch epsilon rule") {
  // weights row-major [out][in], then biases.
  const std::vector<float> blob = {2.f, -2.f, 4.f,  3.f,   // class 0 weights
                                   1.f, 1.f,  1.f,  1.f,   // class 1 weights
                                   0.5f, -0.25f};          // biases
  const Checkpoint ckpt = hand_checkpoint(micro_dense_spec(), blob);
  FloatImage img(2, 2, 1);
  img.values = {1.0f, 0.5f, 0.25f, 0.0f};

  const double eps = 1e-6;
  const Heatmap map = relevance(ckpt, img, 0, eps, "hand");
  REQUIRE(map.values.size() == 4);
  CHECK(map.explained_class == 0);

  // Written independently of the implementation under test.
  const double w[4] = {2, -2, 4, 3}, b = 0.5;
  const double x[4] = {1.0, 0.5, 0.25, 0.0};
  double z[4], z_sum = b, abs_sum = 0;
  for (int i = 0; i < 4; ++i) {
    z[i] = w[i] * x[i];
    z_sum += z[i];
    abs_sum += std::abs(z[i]);
  }
  const double logit = z_sum;
  CHECK(map.explained_score == doctest::Approx(logit).epsilon(1e-9));
  const double denom = z_sum + eps;  // z_sum positive here
  const double residual = logit * (b + eps) / denom;
  for (int i = 0; i < 4; ++i) {
    const double expect = logit * z[i] / denom + residual * std::abs(z[i]) / abs_sum;
    CHECK(map.values[size_t(i)] == doctest::Approx(expect).epsilon(1e-12));
  }
  // The dead input (x=0 -> z=0) collects nothing, even from the residual.
  CHECK(map.values[3] == 0.0);
  CHECK(heat_sum(map) == doctest::Approx(logit).epsilon(1e-12));

  // Explaining the other class follows that class's own row.
  const Heatmap other = relevance(ckpt, img, 1, eps, "hand");
  CHECK(other.explained_class == 1);
  CHECK(other.explained_score == doctest::Approx(1.0 + 0.5 + 0.25 - 0.25).epsilon(1e-9));
  CHECK(heat_sum(other) == doctest::Approx(other.explained_score).epsilon(1e-9));

  CHECK_THROWS_AS(relevance(ckpt, img, 2, eps, ""), ValidationError);
  CHECK_THROWS_AS(relevance(ckpt, img, std::nullopt, 0.0, ""), ValidationError);
}

TEST_CASE("relu gates relevance off dead paths") {
  ModelSpec s;
  s.name = "gate";
  s.arch = Arch::kSmall;
  s.input_shape = {1, 2, 1};
  s.num_classes = 2;
  s.layers = {{LayerKind::kDense, 2, 2}, {LayerKind::kRelu, 0, 0}, {LayerKind::kDense, 2, 2}};
  validate_spec(s);
  // Hidden A sees only pixel 0; hidden B sees only pixel 1 but is driven
  // negative, so ReLU kills it and pixel 1 must end up with zero relevance.
  const std::vector<float> blob = {1.f, 0.f, 0.f, -1.f, 0.f, 0.f,   // dense1 w+b
                                   1.f, 1.f, 1.f, 1.f,  0.f, 0.f};  // dense2 w+b
  const Checkpoint ckpt = hand_checkpoint(s, blob);
  FloatImage img(1, 2, 1);
  img.values = {1.0f, 1.0f};

  const Heatmap map = relevance(ckpt, img, 0);
  REQUIRE(map.values.size() == 2);
  CHECK(map.values[1] == 0.0);
  CHECK(map.values[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(heat_sum(map) == doctest::Approx(map.explained_score).epsilon(1e-12));
}

TEST_CASE("zero input through a bias-free net yields a zero map") {
  const Checkpoint ckpt = build_model(small_spec(3, {8, 8, 1}), 9);  // zero biases
  const FloatImage img(8, 8, 1);                                     // all zeros
  const Heatmap map = relevance(ckpt, img);
  CHECK(map.explained_score == 0.0);
  for (const double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("conservation holds through conv, pool, and dense stacks") {
  const std::vector<ModelSpec> specs = {small_spec(5, {16, 16, 1}),
                                        large_spec(5, {16, 16, 1})};
  for (const auto& spec : specs) {
    CAPTURE(spec.name);
    const Checkpoint ckpt = biased_model(spec, 11);
    for (uint64_t s = 0; s < 6; ++s) {
      const FloatImage img = random_image(16, 16, 1, 200 + s);
      const Heatmap map = relevance(ckpt, img);
      const double tol = 1e-3 * std::abs(map.explained_score) + 1e-6;
      CHECK(std::abs(heat_sum(map) - map.explained_score) <= tol);
      CHECK(map.height == 16);
      CHECK(map.width == 16);
      CHECK(map.source_checkpoint == ckpt.content_hash);
    }
  }
}

TEST_CASE("conservation holds for every class, not just the argmax") {
  const Checkpoint ckpt = biased_model(small_spec(4, {8, 8, 1}), 31);
  const FloatImage img = random_image(8, 8, 1, 77);
  for (int cls = 0; cls < 4; ++cls) {
    const Heatmap map = relevance(ckpt, img, cls);
    CHECK(map.explained_class == cls);
    const double tol = 1e-3 * std::abs(map.explained_score) + 1e-6;
    CHECK(std::abs(heat_sum(map) - map.explained_score) <= tol);
  }
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(-1.0));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({0, 0}, {0, 0}) == 1.0);      // both silent: agree
  CHECK(cosine_similarity({0, 0}, {1, 0}) == 0.0);      // one silent: disagree
  CHECK_THROWS_AS(cosine_similarity({1}, {1, 2}), ValidationError);
}

TEST_CASE("comparison explains each model's own prediction") {
  const Checkpoint target = biased_model(small_spec(3, {8, 8, 1}), 41);
  const Checkpoint copycat = biased_model(small_spec(3, {8, 8, 1}), 42);
  const FloatImage img = random_image(8, 8, 1, 55);

  const Heatmap t_own = relevance(target, img);
  const Heatmap c_own = relevance(copycat, img);

  for (int truth = 0; truth < 3; ++truth) {
    const HeatmapComparison cmp = compare(target, copycat, img, truth);
    CHECK(cmp.target_map.explained_class == t_own.explained_class);
    CHECK(cmp.copycat_map.explained_class == c_own.explained_class);
    CHECK(cmp.similarity ==
          doctest::Approx(cosine_similarity(t_own.values, c_own.values)).epsilon(1e-12));
    CHECK(cmp.similarity >= -1.0 - 1e-9);
    CHECK(cmp.similarity <= 1.0 + 1e-9);
    const bool t_ok = t_own.explained_class == truth;
    const bool c_ok = c_own.explained_class == truth;
    const Agreement expect = t_ok ? (c_ok ? Agreement::kBothCorrect : Agreement::kTargetOnly)
                                  : (c_ok ? Agreement::kCopycatOnly : Agreement::kBothWrong);
    CHECK(cmp.agreement == expect);
  }

  // A model compared against itself agrees with itself everywhere.
  const HeatmapComparison self = compare(target, target, img, t_own.explained_class);
  CHECK(self.similarity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(self.agreement == Agreement::kBothCorrect);

  CHECK(std::string(agreement_name(Agreement::kBothCorrect)) == "BOTH_CORRECT");
  CHECK(std::string(agreement_name(Agreement::kTargetOnly)) == "TARGET_ONLY");
  CHECK(std::string(agreement_name(Agreement::kCopycatOnly)) == "COPYCAT_ONLY");
  CHECK(std::string(agreement_name(Agreement::kBothWrong)) == "BOTH_WRONG");
}

TEST_CASE("raw export writes float32 plus a sidecar") {
  Heatmap map;
  map.height = 2;
  map.width = 3;
  map.values = {0.5, -1.25, 0.0, 3.75, 2.5, -0.125};
  map.source_checkpoint = "cafe";
  map.image_ref = "img/x.png";
  map.explained_class = 4;
  map.explained_score = 5.375;

  const std::string base = "lrp_raw_test";
  write_heatmap_raw(base, map);

  std::ifstream raw(base + ".f32", std::ios::binary);
  REQUIRE(raw.good());
  raw.seekg(0, std::ios::end);
  CHECK(size_t(raw.tellg()) == map.values.size() * sizeof(float));
  raw.seekg(0);
  std::vector<float> back(map.values.size());
  raw.read(reinterpret_cast<char*>(back.data()), std::streamsize(back.size() * sizeof(float)));
  for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == float(map.values[i]));

  std::ifstream side(base + ".json");
  std::string sidecar((std::istreambuf_iterator<char>(side)), std::istreambuf_iterator<char>());
  CHECK(sidecar.find("\"float32\"") != std::string::npos);
  CHECK(sidecar.find("\"cafe\"") != std::string::npos);
  CHECK(sidecar.find("\"img/x.png\"") != std::string::npos);
  CHECK(sidecar.find("\"explained_class\": 4") != std::string::npos);
  fs::remove(base + ".f32");
  fs::remove(base + ".json");
}

TEST_CASE("png export maps sign to a diverging palette") {
  Heatmap map;
  map.height = 2;
  map.width = 2;
  map.values = {1.0, -1.0, 0.0, 0.5};
  const std::string path = "lrp_png_test.png";
  write_heatmap_png(path, map);
  const Image img = load_png(path);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  REQUIRE(img.channels == 3);
  // Max positive is pure red, max negative pure blue, zero white.
  CHECK(img.at(0, 0, 0) == 255);
  CHECK(img.at(0, 0, 2) == 0);
  CHECK(img.at(0, 1, 0) == 0);
  CHECK(img.at(0, 1, 2) == 255);
  CHECK(img.at(1, 0, 0) == 255);
  CHECK(img.at(1, 0, 1) == 255);
  CHECK(img.at(1,  0, 2) == 255);
  fs::remove(path);
}

TEST_CASE("trained models stay conservative") {
  // A short real training run to make sure conservation is not an artifact
  // of symmetric random weights.
  const InputShape shape{8, 8, 1};
  TrainingSet data;
  Rng rng(400);
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < 10; ++i) {
      FloatImage img(8, 8, 1);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          img.at(0, y, x) = (cls == 0) == (y < 4) ? 0.9f : 0.1f;
      img.values[size_t(rng.below(64))] += float(rng.uniform(-0.05, 0.05));
      data.images.push_back(img);
      data.labels.push_back(cls);
    }
  }
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 4;
  const Checkpoint trained = train_in_memory(build_model(small_spec(2, shape), 5), data, cfg);
  for (int i = 0; i < 5; ++i) {
    const Heatmap map = relevance(trained, data.images[size_t(i)]);
    const double tol = 1e-3 * std::abs(map.explained_score) + 1e-6;
    CHECK(std::abs(heat_sum(map) - map.explained_score) <= tol);
  }
}
