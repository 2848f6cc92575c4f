#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copycat/manifest.hpp"
#include "copycat/model.hpp"

namespace copycat {

// Macro-averaged recall: mean over classes of per-class accuracy. Every
// class must appear in truths; an absent class raises MissingClassError
// rather than silently inflating the mean.
double macro_accuracy(const std::vector<int>& predictions, const std::vector<int>& truths,
                      int num_classes);

// copycat_acc / reference_acc x 100; may exceed 100.
double copy_performance(double copycat_acc, double reference_acc);

struct LabelStats {
  std::vector<int64_t> counts;
  double normalized_entropy = 0.0;  // Shannon entropy / log K
  double coverage = 0.0;            // fraction of classes with count > 0
};

LabelStats label_distribution_stats(const std::vector<int>& labels, int num_classes);

// confusion[truth][predicted]
std::vector<std::vector<int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                   const std::vector<int>& truths,
                                                   int num_classes);

std::vector<double> per_class_accuracy(const std::vector<std::vector<int64_t>>& confusion);

struct CopyReport {
  double target_accuracy = 0.0;
  std::optional<double> baseline_accuracy;
  double copycat_accuracy = 0.0;
  double perf_over_target = 0.0;
  std::optional<double> perf_over_baseline;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<int64_t>> confusion;
  std::map<int, int64_t> label_distribution;  // stolen-label histogram
  double normalized_entropy = 0.0;
};

CopyReport make_copy_report(double target_accuracy, std::optional<double> baseline_accuracy,
                            const std::vector<int>& copycat_predictions,
                            const std::vector<int>& truths, int num_classes,
                            const std::vector<int>& stolen_labels);

void write_copy_report(const std::string& path, const CopyReport& report);
CopyReport read_copy_report(const std::string& path);
void write_confusion_csv(const std::string& path,
                         const std::vector<std::vector<int64_t>>& confusion);

// Argmax predictions of a checkpoint over a labeled manifest, plus truths.
std::pair<std::vector<int>, std::vector<int>> predict_manifest(const Checkpoint& ckpt,
                                                               const DatasetManifest& manifest);

// Convenience: macro accuracy of a checkpoint on a labeled manifest.
double evaluate_accuracy(const Checkpoint& ckpt, const DatasetManifest& manifest);

struct RobustnessSummary {
  std::vector<std::pair<uint64_t, double>> runs;  // (seed, perf_over_target)
  double mean = 0.0;
  double std_dev = 0.0;  // sample (n-1) estimator
};

// Runs `runner` once per seed; runner returns perf_over_target for that seed.
RobustnessSummary robustness(const std::vector<uint64_t>& seeds,
                             const std::function<double(uint64_t)>& runner);

void write_robustness(const std::string& path, const RobustnessSummary& summary);

struct CurvePoint {
  int64_t query_count = 0;
  double perf_over_target = 0.0;
  std::optional<double> finetuned_perf;
};

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& points);
void write_curve_svg(const std::string& path, const std::vector<CurvePoint>& points);
void write_label_distribution_csv(const std::string& path, const LabelStats& stats);

}  // namespace copycat
