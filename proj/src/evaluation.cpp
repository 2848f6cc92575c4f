#include "copycat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "copycat/network.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace copycat {

namespace {

void check_label_range(const std::vector<int>& v, int k, const char* what) {
  for (const int x : v)
    if (x < 0 || x >= k)
      throw ValidationError(std::string(what) + " value out of range: " + std::to_string(x));
}

void ensure_parent(const std::string& path) {
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
}

}  // namespace

std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                   const std::vector<int>& truths,
                                                   int num_classes) {
  if (predictions.size() != truths.size())
    throw ValidationError("predictions/truths length mismatch");
  if (predictions.empty()) throw ValidationError("empty evaluation set");
  if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
  check_label_range(predictions, num_classes, "prediction");
  check_label_range(truths, num_classes, "truth");
  std::vector<std::vector<int64_t>> m(size_t(num_classes),
                                      std::vector<int64_t>(size_t(num_classes), 0));
  for (size_t i = 0; i < truths.size(); ++i)
    ++m[size_t(truths[i])][size_t(predictions[i])];
  return m;
}

std::vector<double> per_class_accuracy(const std::vector<std::vector<int64_t>>& confusion) {
  std::vector<double> acc;
  std::vector<int> missing;
  for (size_t c = 0; c < confusion.size(); ++c) {
    int64_t row = 0;
    for (const int64_t v : confusion[c]) row += v;
    if (row == 0) {
      missing.push_back(int(c));
      acc.push_back(0.0);
    } else {
      acc.push_back(double(confusion[c][c]) / double(row));
    }
  }
  if (!missing.empty()) throw MissingClassError(missing);
  return acc;
}

double macro_accuracy(const std::vector<int>& predictions, const std::vector<int>& truths,
                      int num_classes) {
  const auto acc = per_class_accuracy(confusion_matrix(predictions, truths, num_classes));
  double sum = 0.0;
  for (const double a : acc) sum += a;
  return sum / double(acc.size());
}

double copy_performance(double copycat_acc, double reference_acc) {
  if (!(reference_acc > 0.0))
    throw ValidationError("copy_performance reference accuracy must be positive");
  return copycat_acc / reference_acc * 100.0;
}

LabelStats label_distribution_stats(const std::vector<int>& labels, int num_classes) {
  if (labels.empty()) throw ValidationError("label_distribution_stats on empty input");
  if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
  check_label_range(labels, num_classes, "label");
  LabelStats stats;
  stats.counts.assign(size_t(num_classes), 0);
  for (const int l : labels) ++stats.counts[size_t(l)];
  const double n = double(labels.size());
  double entropy = 0.0;
  int covered = 0;
  for (const int64_t c : stats.counts) {
    if (c == 0) continue;
    ++covered;
    const double p = double(c) / n;
    entropy -= p * std::log(p);
  }
  stats.normalized_entropy = entropy / std::log(double(num_classes));
  stats.coverage = double(covered) / double(num_classes);
  return stats;
}

CopyReport make_copy_report(double target_accuracy, std::optional<double> baseline_accuracy,
                            const std::vector<int>& copycat_predictions,
                            const std::vector<int>& truths, int num_classes,
                            const std::vector<int>& stolen_labels) {
  CopyReport r;
  r.target_accuracy = target_accuracy;
  r.baseline_accuracy = baseline_accuracy;
  r.confusion = confusion_matrix(copycat_predictions, truths, num_classes);
  r.per_class_accuracy = per_class_accuracy(r.confusion);
  double sum = 0.0;
  for (const double a : r.per_class_accuracy) sum += a;
  r.copycat_accuracy = sum / double(num_classes);
  r.perf_over_target = copy_performance(r.copycat_accuracy, target_accuracy);
  if (baseline_accuracy) {
    r.perf_over_baseline = copy_performance(r.copycat_accuracy, *baseline_accuracy);
  }
  if (!stolen_labels.empty()) {
    const LabelStats stats = label_distribution_stats(stolen_labels, num_classes);
    for (int c = 0; c < num_classes; ++c) r.label_distribution[c] = stats.counts[size_t(c)];
    r.normalized_entropy = stats.normalized_entropy;
  }
  return r;
}

void write_copy_report(const std::string& path, const CopyReport& r) {
  ensure_parent(path);
  json dist = json::object();
  for (const auto& [cls, count] : r.label_distribution) dist[std::to_string(cls)] = count;
  json j{{"target_accuracy", r.target_accuracy},
         {"baseline_accuracy", r.baseline_accuracy ? json(*r.baseline_accuracy) : json(nullptr)},
         {"copycat_accuracy", r.copycat_accuracy},
         {"perf_over_target", r.perf_over_target},
         {"perf_over_baseline",
          r.perf_over_baseline ? json(*r.perf_over_baseline) : json(nullptr)},
         {"per_class_accuracy", r.per_class_accuracy},
         {"confusion", r.confusion},
         {"label_distribution", dist},
         {"normalized_entropy", r.normalized_entropy}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write copy report: " + path);
  out << j.dump(2) << '\n';
}

CopyReport read_copy_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open copy report: " + path);
  json j;
  try {
    in >> j;
    CopyReport r;
    j.at("target_accuracy").get_to(r.target_accuracy);
    if (!j.at("baseline_accuracy").is_null())
      r.baseline_accuracy = j.at("baseline_accuracy").get<double>();
    j.at("copycat_accuracy").get_to(r.copycat_accuracy);
    j.at("perf_over_target").get_to(r.perf_over_target);
    if (!j.at("perf_over_baseline").is_null())
      r.perf_over_baseline = j.at("perf_over_baseline").get<double>();
    j.at("per_class_accuracy").get_to(r.per_class_accuracy);
    j.at("confusion").get_to(r.confusion);
    for (const auto& [key, value] : j.at("label_distribution").items())
      r.label_distribution[std::stoi(key)] = value.get<int64_t>();
    j.at("normalized_entropy").get_to(r.normalized_entropy);
    return r;
  } catch (const json::exception& e) {
    throw IoError("malformed copy report " + path + ": " + e.what());
  }
}

void write_confusion_csv(const std::string& path,
                         const std::vector<std::vector<int64_t>>& confusion) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write confusion csv: " + path);
  for (const auto& row : confusion) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

std::pair<std::vector<int>, std::vector<int>> predict_manifest(const Checkpoint& ckpt,
                                                               const DatasetManifest& manifest) {
  validate_manifest(manifest);
  if (manifest.label_source == LabelSource::kNone)
    throw ValidationError("evaluation needs a labeled manifest");
  if (manifest.num_classes != ckpt.spec.num_classes)
    throw ValidationError("manifest num_classes does not match the model");
  Network<float> net(ckpt.spec, ckpt.blob, ckpt.mean_size);
  std::vector<int> preds, truths;
  preds.reserve(manifest.records.size());
  truths.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    const FloatImage img = load_input_image(rec.ref, ckpt.spec.input_shape);
    const std::vector<float> z = net.logits(img);
    preds.push_back(int(std::max_element(z.begin(), z.end()) - z.begin()));
    truths.push_back(*rec.label);
  }
  return {std::move(preds), std::move(truths)};
}

double evaluate_accuracy(const Checkpoint& ckpt, const DatasetManifest& manifest) {
  const auto [preds, truths] = predict_manifest(ckpt, manifest);
  return macro_accuracy(preds, truths, ckpt.spec.num_classes);
}

RobustnessSummary robustness(const std::vector<uint64_t>& seeds,
                             const std::function<double(uint64_t)>& runner) {
  if (seeds.size() < 2) throw ValidationError("robustness needs at least 2 seeds");
  RobustnessSummary s;
  for (const uint64_t seed : seeds) s.runs.emplace_back(seed, runner(seed));
  double sum = 0.0;
  for (const auto& [seed, perf] : s.runs) sum += perf;
  s.mean = sum / double(s.runs.size());
  double sq = 0.0;
  for (const auto& [seed, perf] : s.runs) sq += (perf - s.mean) * (perf - s.mean);
  s.std_dev = std::sqrt(sq / double(s.runs.size() - 1));
  return s;
}

void write_robustness(const std::string& path, const RobustnessSummary& summary) {
  ensure_parent(path);
  json runs = json::array();
  for (const auto& [seed, perf] : summary.runs)
    runs.push_back(json{{"seed", seed}, {"perf_over_target", perf}});
  const json j{{"runs", runs}, {"mean", summary.mean}, {"std", summary.std_dev}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write robustness summary: " + path);
  out << j.dump(2) << '\n';
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& points) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write curve csv: " + path);
  out << "query_count,perf_over_target,finetuned_perf\n";
  for (const auto& p : points) {
    out << p.query_count << ',' << p.perf_over_target << ',';
    if (p.finetuned_perf) out << *p.finetuned_perf;
    out << '\n';
  }
}

void write_curve_svg(const std::string& path, const std::vector<CurvePoint>& points) {
  if (points.empty()) throw ValidationError("cannot plot an empty curve");
  ensure_parent(path);
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 20, mb = 50;
  double max_x = 1.0, max_y = 10.0;
  for (const auto& p : points) {
    max_x = std::max(max_x, double(p.query_count));
    max_y = std::max(max_y, p.perf_over_target);
    if (p.finetuned_perf) max_y = std::max(max_y, *p.finetuned_perf);
  }
  max_y = std::ceil(max_y / 10.0) * 10.0;
  const auto sx = [&](double x) { return ml + x / max_x * (w - ml - mr); };
  const auto sy = [&](double y) { return h - mb - y / max_y * (h - mt - mb); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write curve svg: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (int grid = 0; grid <= 10; grid += 2) {
    const double y = max_y * grid / 10.0;
    out << "<text x='8' y='" << sy(y) + 4 << "' font-size='11'>" << y << "</text>\n";
  }
  const auto polyline = [&](bool finetuned, const char* color) {
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (const auto& p : points) {
      const double v = finetuned ? (p.finetuned_perf ? *p.finetuned_perf : 0.0)
                                 : p.perf_over_target;
      if (finetuned && !p.finetuned_perf) continue;
      out << sx(double(p.query_count)) << ',' << sy(v) << ' ';
    }
    out << "'/>\n";
  };
  polyline(false, "#1f6fb2");
  bool any_ft = false;
  for (const auto& p : points) any_ft = any_ft || p.finetuned_perf.has_value();
  if (any_ft) polyline(true, "#b2451f");
  for (const auto& p : points) {
    out << "<circle cx='" << sx(double(p.query_count)) << "' cy='" << sy(p.perf_over_target)
        << "' r='3' fill='#1f6fb2'/>\n";
    out << "<text x='" << sx(double(p.query_count)) - 10 << "' y='" << h - mb + 16
        << "' font-size='11'>" << p.query_count << "</text>\n";
  }
  out << "<text x='" << (w / 2 - 40) << "' y='" << h - 12
      << "' font-size='12'>oracle queries</text>\n";
  out << "<text x='14' y='14' font-size='12'>copy performance (% of target)</text>\n";
  out << "</svg>\n";
}

void write_label_distribution_csv(const std::string& path, const LabelStats& stats) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write label distribution csv: " + path);
  out << "class,count\n";
  for (size_t c = 0; c < stats.counts.size(); ++c) out << c << ',' << stats.counts[c] << '\n';
  out << "# normalized_entropy," << stats.normalized_entropy << '\n';
  out << "# coverage," << stats.coverage << '\n';
}

}  // namespace copycat
