#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "copycat/evaluation.hpp"
#include "copycat/rng.hpp"

using namespace copycat;

namespace {

// Independent reference: accuracy per class from scratch counters.
double brute_macro(const std::vector<int>& preds, const std::vector<int>& truths, int k) {
  std::vector<int> total(k, 0), hit(k, 0);
  for (size_t i = 0; i < truths.size(); ++i) {
    ++total[truths[i]];
    if (preds[i] == truths[i]) ++hit[truths[i]];
  }
  double sum = 0;
  for (int c = 0; c < k; ++c) sum += double(hit[c]) / double(total[c]);
  return sum / k;
}

}  // namespace

TEST_CASE("macro accuracy hand-enumerated case") {
  // class 0: correct 3 of 4; class 1: correct 1 of 2 -> (0.75 + 0.5) / 2.
  const std::vector<int> truths{0, 0, 0, 0, 1, 1};
  const std::vector<int> preds{0, 0, 0, 1, 1, 0};
  CHECK(macro_accuracy(preds, truths, 2) == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("macro accuracy trivial cases") {
  CHECK(macro_accuracy({0, 1, 2}, {0, 1, 2}, 3) == 1.0);
  // All-zero predictions on balanced two-class data.
  CHECK(macro_accuracy({0, 0, 0, 0}, {0, 0, 1, 1}, 2) == doctest::Approx(0.5));
}

TEST_CASE("macro accuracy errors") {
  CHECK_THROWS_AS(macro_accuracy({0, 1}, {0, 0}, 2), MissingClassError);  // class 1 absent
  CHECK_THROWS_AS(macro_accuracy({}, {}, 2), ValidationError);
  CHECK_THROWS_AS(macro_accuracy({0}, {0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(macro_accuracy({2}, {0}, 2), ValidationError);  // prediction out of range
  try {
    macro_accuracy({0, 0, 0}, {0, 0, 0}, 3);
    FAIL("expected MissingClassError");
  } catch (const MissingClassError& e) {
    const auto& missing = e.missing_classes();
    REQUIRE(missing.size() == 2);
    CHECK(missing[0] == 1);
    CHECK(missing[1] == 2);
  }
}

TEST_CASE("macro accuracy is permutation invariant and matches brute force") {
  Rng rng(99);
  std::vector<int> truths, preds;
  const int k = 5;
  for (int c = 0; c < k; ++c) truths.push_back(c);  // every class present
  for (int i = 0; i < 400; ++i) truths.push_back(int(rng.below(k)));
  for (size_t i = 0; i < truths.size(); ++i) preds.push_back(int(rng.below(k)));

  const double base = macro_accuracy(preds, truths, k);
  CHECK(base == doctest::Approx(brute_macro(preds, truths, k)).epsilon(1e-12));

  std::vector<size_t> order(truths.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> p2, t2;
  for (const size_t i : order) {
    p2.push_back(preds[i]);
    t2.push_back(truths[i]);
  }
  CHECK(macro_accuracy(p2, t2, k) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("macro accuracy equals mean diagonal of row-normalized confusion") {
  Rng rng(1234);
  const int k = 4;
  std::vector<int> truths, preds;
  for (int c = 0; c < k; ++c) truths.push_back(c);
  for (int i = 0; i < 300; ++i) truths.push_back(int(rng.below(k)));
  for (size_t i = 0; i < truths.size(); ++i)
    preds.push_back(rng.uniform() < 0.6 ? truths[i] : int(rng.below(k)));

  const auto confusion = confusion_matrix(preds, truths, k);
  double diag_mean = 0;
  for (int c = 0; c < k; ++c) {
    int64_t row = 0;
    for (int j = 0; j < k; ++j) row += confusion[c][j];
    diag_mean += double(confusion[c][c]) / double(row);
  }
  diag_mean /= k;
  CHECK(macro_accuracy(preds, truths, k) == doctest::Approx(diag_mean).epsilon(1e-12));

  // Row sums equal per-class truth counts.
  std::vector<int64_t> per_class(k, 0);
  for (const int t : truths) ++per_class[t];
  for (int c = 0; c < k; ++c) {
    int64_t row = 0;
    for (int j = 0; j < k; ++j) row += confusion[c][j];
    CHECK(row == per_class[c]);
  }
}

TEST_CASE("copy performance ratios") {
  CHECK(copy_performance(0.887, 0.887) == doctest::Approx(100.0).epsilon(1e-12));
  // Published ratio 96.7% with reference 0.692 inverts to ~0.669; feeding the
  // rounded operand back must land within rounding distance of 96.7.
  CHECK(copy_performance(0.669, 0.692) == doctest::Approx(96.7).epsilon(5e-4));
  CHECK(copy_performance(0.999 * 1.076, 0.999) == doctest::Approx(107.6).epsilon(1e-9));
  CHECK(copy_performance(0.5, 0.25) == doctest::Approx(200.0));
  CHECK_THROWS_AS(copy_performance(0.5, 0.0), ValidationError);
  CHECK_THROWS_AS(copy_performance(0.5, -0.1), ValidationError);
  for (double a : {0.001, 0.25, 0.51, 0.93}) CHECK(copy_performance(a, a) == 100.0);
}

TEST_CASE("label distribution statistics") {
  SUBCASE("uniform is maximal") {
    std::vector<int> labels;
    for (int c = 0; c < 6; ++c)
      for (int i = 0; i < 7; ++i) labels.push_back(c);
    const LabelStats s = label_distribution_stats(labels, 6);
    CHECK(s.normalized_entropy == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.coverage == doctest::Approx(1.0));
  }
  SUBCASE("degenerate is zero") {
    const LabelStats s = label_distribution_stats({3, 3, 3, 3}, 5);
    CHECK(s.normalized_entropy == doctest::Approx(0.0));
    CHECK(s.coverage == doctest::Approx(0.2));
    CHECK(s.counts[3] == 4);
  }
  SUBCASE("counts 8-2 over two classes") {
    std::vector<int> labels(8, 0);
    labels.insert(labels.end(), 2, 1);
    const LabelStats s = label_distribution_stats(labels, 2);
    const double expect = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2)) / std::log(2.0);
    CHECK(s.normalized_entropy == doctest::Approx(expect).epsilon(1e-12));
    CHECK(s.normalized_entropy == doctest::Approx(0.7219).epsilon(1e-4));
  }
  SUBCASE("bounds hold on random histograms") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 2 + int(rng.below(8));
      std::vector<int> labels;
      const int n = 1 + int(rng.below(200));
      for (int i = 0; i < n; ++i) labels.push_back(int(rng.below(k)));
      const LabelStats s = label_distribution_stats(labels, k);
      CHECK(s.normalized_entropy >= 0.0);
      CHECK(s.normalized_entropy <= 1.0 + 1e-12);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(label_distribution_stats({}, 3), ValidationError);
    CHECK_THROWS_AS(label_distribution_stats({3}, 3), ValidationError);
  }
}

TEST_CASE("copy report fields and io") {
  const std::vector<int> truths{0, 0, 0, 1, 1, 1};
  const std::vector<int> preds{0, 0, 1, 1, 1, 1};
  const std::vector<int> stolen{0, 0, 0, 1, 1, 0};
  const CopyReport r = make_copy_report(0.9, 0.8, preds, truths, 2, stolen);
  const double macro = (2.0 / 3.0 + 1.0) / 2.0;
  CHECK(r.copycat_accuracy == doctest::Approx(macro).epsilon(1e-12));
  CHECK(r.perf_over_target == doctest::Approx(macro / 0.9 * 100.0).epsilon(1e-12));
  REQUIRE(r.perf_over_baseline.has_value());
  CHECK(*r.perf_over_baseline == doctest::Approx(macro / 0.8 * 100.0).epsilon(1e-12));
  CHECK(r.per_class_accuracy.size() == 2);
  CHECK(r.label_distribution.at(0) == 4);
  CHECK(r.label_distribution.at(1) == 2);

  const std::string path = "copy_report_test.json";
  write_copy_report(path, r);
  const CopyReport back = read_copy_report(path);
  CHECK(back.target_accuracy == r.target_accuracy);
  CHECK(back.copycat_accuracy == r.copycat_accuracy);
  CHECK(back.perf_over_target == r.perf_over_target);
  CHECK(back.baseline_accuracy == r.baseline_accuracy);
  CHECK(back.confusion == r.confusion);
  CHECK(back.label_distribution == r.label_distribution);

  // Rewriting the same report is byte-identical (no timestamps inside).
  std::stringstream first, second;
  first << std::ifstream(path).rdbuf();
  write_copy_report(path, back);
  second << std::ifstream(path).rdbuf();
  CHECK(first.str() == second.str());
  std::remove(path.c_str());
}

TEST_CASE("missing baseline stays missing") {
  const CopyReport r = make_copy_report(0.9, std::nullopt, {0, 1}, {0, 1}, 2, {});
  CHECK_FALSE(r.baseline_accuracy.has_value());
  CHECK_FALSE(r.perf_over_baseline.has_value());
  const std::string path = "copy_report_nobase_test.json";
  write_copy_report(path, r);
  CHECK_FALSE(read_copy_report(path).perf_over_baseline.has_value());
  std::remove(path.c_str());
}

TEST_CASE("robustness summary statistics") {
  std::map<uint64_t, double> table{{1, 94.0}, {2, 96.0}, {3, 98.0}};
  const RobustnessSummary s =
      robustness({1, 2, 3}, [&](uint64_t seed) { return table.at(seed); });
  CHECK(s.mean == doctest::Approx(96.0));
  CHECK(s.std_dev == doctest::Approx(2.0));  // sample estimator over {94,96,98}
  REQUIRE(s.runs.size() == 3);
  CHECK(s.runs[0].first == 1);

  const RobustnessSummary same = robustness({7, 7, 7}, [](uint64_t) { return 91.5; });
  CHECK(same.std_dev == doctest::Approx(0.0));

  CHECK_THROWS_AS(robustness({1}, [](uint64_t) { return 1.0; }), ValidationError);

  const std::string path = "robustness_test.json";
  write_robustness(path, s);
  std::stringstream ss;
  ss << std::ifstream(path).rdbuf();
  CHECK(ss.str().find("\"mean\"") != std::string::npos);
  CHECK(ss.str().find("\"std\"") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("curve writers") {
  std::vector<CurvePoint> points;
  points.push_back({0, 10.0, std::nullopt});
  points.push_back({1000, 80.0, 85.0});
  points.push_back({20000, 95.5, 96.0});
  const std::string csv = "curve_test.csv", svg = "curve_test.svg";
  write_curve_csv(csv, points);
  std::stringstream ss;
  ss << std::ifstream(csv).rdbuf();
  CHECK(ss.str().find("query_count,perf_over_target,finetuned_perf") != std::string::npos);
  CHECK(ss.str().find("20000,95.5,96") != std::string::npos);
  write_curve_svg(svg, points);
  std::stringstream sv;
  sv << std::ifstream(svg).rdbuf();
  CHECK(sv.str().find("<svg") != std::string::npos);
  CHECK(sv.str().find("polyline") != std::string::npos);
  std::remove(csv.c_str());
  std::remove(svg.c_str());
}

TEST_CASE("confusion csv and label distribution csv") {
  write_confusion_csv("conf_test.csv", {{3, 1}, {0, 2}});
  std::stringstream ss;
  ss << std::ifstream("conf_test.csv").rdbuf();
  CHECK(ss.str().find("3,1") != std::string::npos);
  std::remove("conf_test.csv");

  const LabelStats s = label_distribution_stats({0, 0, 1}, 2);
  write_label_distribution_csv("dist_test.csv", s);
  std::stringstream ds;
  ds << std::ifstream("dist_test.csv").rdbuf();
  CHECK(ds.str().find("class,count") != std::string::npos);
  CHECK(ds.str().find("0,2") != std::string::npos);
  std::remove("dist_test.csv");
}
