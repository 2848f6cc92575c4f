#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copycat/image.hpp"
#include "copycat/model.hpp"

namespace copycat {

enum class Split { kOdd, kPdd, kNpdd, kTdd };
enum class LabelSource { kOl, kSl, kNone };

const char* split_name(Split s);
const char* label_source_name(LabelSource s);
Split split_from(const std::string& s);
LabelSource label_source_from(const std::string& s);

struct ManifestRecord {
  std::string ref;
  std::optional<int> label;
};

struct DatasetManifest {
  Split split = Split::kNpdd;
  LabelSource label_source = LabelSource::kNone;
  int num_classes = 0;
  std::vector<ManifestRecord> records;

  size_t size() const { return records.size(); }
};

// Split/label-source pairing rules: ODD and TDD carry OL; NPDD carries NONE
// until labels are stolen, then SL; PDD carries OL or SL. OL/SL manifests
// label every record; NONE manifests label none. Labels lie in [0, K).
void validate_manifest(const DatasetManifest& m);

// JSONL, one record per line:
// {"ref": ..., "label": int|null, "split": ..., "label_source": ...}
void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

// Loads a manifest image and converts it to the model input representation.
FloatImage load_input_image(const std::string& ref, const InputShape& shape);

// Removes records whose decoded pixel content duplicates an earlier record.
// Order of first occurrence is preserved. Unreadable refs are collected and
// reported in a single IoError.
DatasetManifest dedup(const DatasetManifest& pool);

// Writes `count` PNGs of i.i.d. uniform [0,255] pixels into out_dir and
// returns an NPDD manifest over them.
DatasetManifest generate_random_pixels(int count, InputShape shape, uint64_t seed,
                                       const std::string& out_dir, int num_classes);

struct SplitFractions {
  double odd = 0.6;
  double pdd = 0.2;
  double tdd = 0.2;
};

struct ProblemSplits {
  DatasetManifest odd;
  DatasetManifest pdd;
  DatasetManifest tdd;
};

// Stratified, seeded, pairwise-disjoint. `full` must be fully labeled with
// unique refs; every class must land at least one record in every split.
ProblemSplits split_problem(const DatasetManifest& full, SplitFractions fractions,
                            uint64_t seed);

struct StolenLabelRecord {
  std::string ref;
  int hard_label = 0;
  int64_t query_index = 0;
  std::string oracle_id;
};

void write_stolen(const std::string& path, const std::vector<StolenLabelRecord>& records);
std::vector<StolenLabelRecord> read_stolen(const std::string& path);

struct BalanceReport {
  std::map<int, int> per_class_before;
  std::map<int, int> per_class_after;
  int target_per_class = 0;
  int replicated = 0;
  int eliminated = 0;
};

void write_balance_report(const std::string& path, const BalanceReport& report);

// Lower median of the per-class counts; the default balance target.
int default_balance_target(const std::map<int, int>& per_class_counts);

// Exactly target_per_class records per class: short classes replicate
// uniformly at random from their own records, long classes drop uniformly
// at random. Classes with zero records raise MissingClassError.
std::pair<DatasetManifest, BalanceReport> balance(const std::vector<StolenLabelRecord>& records,
                                                  int num_classes, int target_per_class,
                                                  uint64_t seed);

// The twelve augmentation operations.
extern const std::vector<std::string> kAugmentationOps;

// Emits multiplier variants per record into out_dir (multiplier=1 with no
// ops is the identity). Each variant applies every listed op with fresh
// random parameters inside the default ranges.
DatasetManifest augment(const DatasetManifest& manifest, const std::vector<std::string>& ops,
                        int multiplier, uint64_t seed, const std::string& out_dir);

}  // namespace copycat
