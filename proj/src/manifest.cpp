#include "copycat/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "copycat/rng.hpp"
#include "copycat/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace copycat {

const char* split_name(Split s) {
  switch (s) {
    case Split::kOdd:
      return "ODD";
    case Split::kPdd:
      return "PDD";
    case Split::kNpdd:
      return "NPDD";
    case Split::kTdd:
      return "TDD";
  }
  return "?";
}

const char* label_source_name(LabelSource s) {
  switch (s) {
    case LabelSource::kOl:
      return "OL";
    case LabelSource::kSl:
      return "SL";
    case LabelSource::kNone:
      return "NONE";
  }
  return "?";
}

Split split_from(const std::string& s) {
  if (s == "ODD") return Split::kOdd;
  if (s == "PDD") return Split::kPdd;
  if (s == "NPDD") return Split::kNpdd;
  if (s == "TDD") return Split::kTdd;
  throw ValidationError("unknown split: " + s);
}

LabelSource label_source_from(const std::string& s) {
  if (s == "OL") return LabelSource::kOl;
  if (s == "SL") return LabelSource::kSl;
  if (s == "NONE") return LabelSource::kNone;
  throw ValidationError("unknown label_source: " + s);
}

void validate_manifest(const DatasetManifest& m) {
  if (m.num_classes < 2) throw ValidationError("manifest num_classes must be at least 2");
  switch (m.split) {
    case Split::kOdd:
    case Split::kTdd:
      if (m.label_source != LabelSource::kOl)
        throw ValidationError(std::string(split_name(m.split)) + " manifests must carry OL labels");
      break;
    case Split::kNpdd:
      if (m.label_source == LabelSource::kOl)
        throw ValidationError("NPDD manifests never carry OL labels");
      break;
    case Split::kPdd:
      if (m.label_source == LabelSource::kNone)
        throw ValidationError("PDD manifests must carry OL or SL labels");
      break;
  }
  const bool want_labels = m.label_source != LabelSource::kNone;
  for (const auto& r : m.records) {
    if (r.ref.empty()) throw ValidationError("manifest record with empty ref");
    if (want_labels) {
      if (!r.label) throw ValidationError("labeled manifest has an unlabeled record: " + r.ref);
      if (*r.label < 0 || *r.label >= m.num_classes)
        throw ValidationError("label out of range for " + r.ref);
    } else if (r.label) {
      throw ValidationError("unlabeled manifest carries a label: " + r.ref);
    }
  }
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  validate_manifest(m);
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& r : m.records) {
    json line{{"ref", r.ref},
              {"label", r.label ? json(*r.label) : json(nullptr)},
              {"split", split_name(m.split)},
              {"label_source", label_source_name(m.label_source)}};
    // num_classes rides on every line so a manifest is self-describing
    line["num_classes"] = m.num_classes;
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("short write on manifest: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    try {
      const Split split = split_from(j.at("split").get<std::string>());
      const LabelSource src = label_source_from(j.at("label_source").get<std::string>());
      const int k = j.at("num_classes").get<int>();
      if (first) {
        m.split = split;
        m.label_source = src;
        m.num_classes = k;
        first = false;
      } else if (split != m.split || src != m.label_source || k != m.num_classes) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": mixed split/label_source/num_classes in one manifest");
      }
      ManifestRecord r;
      r.ref = j.at("ref").get<std::string>();
      if (!j.at("label").is_null()) r.label = j.at("label").get<int>();
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": missing field: " + e.what());
    }
  }
  if (first) throw ValidationError("manifest is empty: " + path);
  validate_manifest(m);
  return m;
}

FloatImage load_input_image(const std::string& ref, const InputShape& shape) {
  const Image raw = load_png(ref);
  FloatImage f = to_float(raw);
  if (f.channels != shape.channels) f = convert_channels(f, shape.channels);
  if (f.height != shape.height || f.width != shape.width)
    f = resize_bilinear(f, shape.height, shape.width);
  return f;
}

DatasetManifest dedup(const DatasetManifest& pool) {
  DatasetManifest out = pool;
  out.records.clear();
  std::unordered_set<std::string> seen;
  std::vector<std::string> unreadable;
  for (const auto& r : pool.records) {
    try {
      const std::string digest = pixel_digest(load_png(r.ref));
      if (seen.insert(digest).second) out.records.push_back(r);
    } catch (const IoError&) {
      unreadable.push_back(r.ref);
    }
  }
  if (!unreadable.empty()) {
    std::string msg = "unreadable image refs:";
    for (const auto& u : unreadable) msg += " " + u;
    throw IoError(msg);
  }
  return out;
}

DatasetManifest generate_random_pixels(int count, InputShape shape, uint64_t seed,
                                       const std::string& out_dir, int num_classes) {
  if (count < 1) throw ValidationError("random-pixel count must be at least 1");
  fs::create_directories(out_dir);
  Rng rng(derive_seed(seed, "random-pixels"));
  DatasetManifest m;
  m.split = Split::kNpdd;
  m.label_source = LabelSource::kNone;
  m.num_classes = num_classes;
  Image img;
  img.width = shape.width;
  img.height = shape.height;
  img.channels = shape.channels;
  img.pixels.resize(img.pixel_count());
  char name[32];
  for (int i = 0; i < count; ++i) {
    for (auto& p : img.pixels) p = uint8_t(rng.below(256));
    std::snprintf(name, sizeof(name), "rand_%06d.png", i);
    const std::string path = (fs::path(out_dir) / name).string();
    save_png(path, img);
    m.records.push_back({path, std::nullopt});
  }
  return m;
}

ProblemSplits split_problem(const DatasetManifest& full, SplitFractions fractions,
                            uint64_t seed) {
  validate_manifest(full);
  if (full.label_source == LabelSource::kNone)
    throw ValidationError("split_problem needs a labeled manifest");
  if (fractions.odd <= 0 || fractions.pdd <= 0 || fractions.tdd <= 0)
    throw ValidationError("split fractions must be positive");
  if (fractions.odd + fractions.pdd + fractions.tdd > 1.0 + 1e-9)
    throw ValidationError("split fractions must sum to at most 1");

  std::unordered_set<std::string> refs;
  for (const auto& r : full.records)
    if (!refs.insert(r.ref).second)
      throw ValidationError("split_problem input has duplicate ref (dedup first): " + r.ref);

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < full.records.size(); ++i) by_class[*full.records[i].label].push_back(i);

  ProblemSplits out;
  out.odd.split = Split::kOdd;
  out.pdd.split = Split::kPdd;
  out.tdd.split = Split::kTdd;
  for (auto* m : {&out.odd, &out.pdd, &out.tdd}) {
    m->label_source = LabelSource::kOl;
    m->num_classes = full.num_classes;
  }

  for (auto& [cls, idx] : by_class) {
    Rng rng(derive_seed(seed, "split-class-" + std::to_string(cls)));
    rng.shuffle(idx);
    const size_t n = idx.size();
    const size_t n_odd = size_t(fractions.odd * double(n) + 0.5);
    const size_t n_pdd = size_t(fractions.pdd * double(n) + 0.5);
    size_t n_tdd = size_t(fractions.tdd * double(n) + 0.5);
    if (n_odd + n_pdd > n) {
      throw ValidationError("class " + std::to_string(cls) +
                            " is too small to appear in every split");
    }
    n_tdd = std::min(n_tdd, n - n_odd - n_pdd);
    if (n_odd == 0 || n_pdd == 0 || n_tdd == 0)
      throw ValidationError("class " + std::to_string(cls) +
                            " is too small to appear in every split");
    size_t pos = 0;
    for (size_t i = 0; i < n_odd; ++i) out.odd.records.push_back(full.records[idx[pos++]]);
    for (size_t i = 0; i < n_pdd; ++i) out.pdd.records.push_back(full.records[idx[pos++]]);
    for (size_t i = 0; i < n_tdd; ++i) out.tdd.records.push_back(full.records[idx[pos++]]);
  }
  return out;
}

void write_stolen(const std::string& path, const std::vector<StolenLabelRecord>& records) {
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open stolen-label file for writing: " + path);
  for (const auto& r : records) {
    const json line{{"ref", r.ref},
                    {"hard_label", r.hard_label},
                    {"query_index", r.query_index},
                    {"oracle_id", r.oracle_id}};
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("short write on stolen-label file: " + path);
}

std::vector<StolenLabelRecord> read_stolen(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stolen-label file: " + path);
  std::vector<StolenLabelRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      StolenLabelRecord r;
      r.ref = j.at("ref").get<std::string>();
      r.hard_label = j.at("hard_label").get<int>();
      r.query_index = j.at("query_index").get<int64_t>();
      r.oracle_id = j.at("oracle_id").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_balance_report(const std::string& path, const BalanceReport& report) {
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  json per_before = json::object(), per_after = json::object();
  for (const auto& [k, v] : report.per_class_before) per_before[std::to_string(k)] = v;
  for (const auto& [k, v] : report.per_class_after) per_after[std::to_string(k)] = v;
  const json j{{"per_class_before", per_before},
               {"per_class_after", per_after},
               {"target_per_class", report.target_per_class},
               {"replicated", report.replicated},
               {"eliminated", report.eliminated}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open balance report for writing: " + path);
  out << j.dump(2) << '\n';
}

int default_balance_target(const std::map<int, int>& per_class_counts) {
  if (per_class_counts.empty()) throw ValidationError("no class counts to take a median of");
  std::vector<int> counts;
  counts.reserve(per_class_counts.size());
  for (const auto& [cls, n] : per_class_counts) counts.push_back(n);
  std::sort(counts.begin(), counts.end());
  return counts[(counts.size() - 1) / 2];
}

}  // namespace copycat
