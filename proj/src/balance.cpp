#include <map>
#include <vector>

#include "copycat/manifest.hpp"
#include "copycat/rng.hpp"

namespace copycat {

std::pair<DatasetManifest, BalanceReport> balance(const std::vector<StolenLabelRecord>& records,
                                                  int num_classes, int target_per_class,
                                                  uint64_t seed) {
  if (num_classes < 2) throw ValidationError("balance needs at least 2 classes");
  if (target_per_class < 1) throw ValidationError("target_per_class must be at least 1");
  for (const auto& r : records)
    if (r.hard_label < 0 || r.hard_label >= num_classes)
      throw ValidationError("stolen label out of range: " + std::to_string(r.hard_label));

  std::map<int, std::vector<size_t>> by_class;
  for (int c = 0; c < num_classes; ++c) by_class[c];
  for (size_t i = 0; i < records.size(); ++i) by_class[records[i].hard_label].push_back(i);

  std::vector<int> missing;
  for (const auto& [cls, idx] : by_class)
    if (idx.empty()) missing.push_back(cls);
  if (!missing.empty()) throw MissingClassError(missing);

  BalanceReport report;
  report.target_per_class = target_per_class;

  DatasetManifest out;
  out.split = Split::kNpdd;
  out.label_source = LabelSource::kSl;
  out.num_classes = num_classes;

  for (auto& [cls, idx] : by_class) {
    report.per_class_before[cls] = int(idx.size());
    Rng rng(derive_seed(seed, "balance-class-" + std::to_string(cls)));
    std::vector<size_t> chosen;
    if (int(idx.size()) > target_per_class) {
      // uniform elimination: keep a random subset, original order preserved
      auto pool = idx;
      rng.shuffle(pool);
      pool.resize(size_t(target_per_class));
      std::sort(pool.begin(), pool.end());
      chosen = pool;
      report.eliminated += int(idx.size()) - target_per_class;
    } else {
      chosen = idx;
      while (int(chosen.size()) < target_per_class) {
        chosen.push_back(idx[rng.below(idx.size())]);
        ++report.replicated;
      }
    }
    for (const size_t i : chosen)
      out.records.push_back({records[i].ref, records[i].hard_label});
    report.per_class_after[cls] = target_per_class;
  }
  validate_manifest(out);
  return {std::move(out), std::move(report)};
}

}  // namespace copycat
