#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "copycat/manifest.hpp"
#include "copycat/model.hpp"

namespace copycat {

enum class FeatureOrigin { kOddOl, kNpddSl };

const char* origin_name(FeatureOrigin o);
FeatureOrigin origin_from(const std::string& name);

struct FeatureVector {
  std::string ref;
  int label = 0;
  std::vector<float> feature;
};

struct FeatureSet {
  FeatureOrigin origin = FeatureOrigin::kOddOl;
  std::vector<FeatureVector> vectors;
  std::vector<double> mean;     // per dimension, filled by standardize
  std::vector<double> std_dev;  // floored at 1e-8
  bool standardized = false;
};

// Runs every manifest record through the network's penultimate layer. The
// manifest must be labeled and match the origin (ODD/OL or NPDD/SL). Extraction
// is split across `workers` threads; record order is preserved.
FeatureSet extract_feature_set(const Checkpoint& ckpt, const DatasetManifest& manifest,
                               FeatureOrigin origin, int workers = 1);

// In-place per-dimension standardization over the set's own statistics.
void standardize(FeatureSet& set);

// Exactly per_class records of each class, chosen by seeded per-class shuffle.
DatasetManifest sample_odd(const DatasetManifest& odd, int per_class, uint64_t seed);

struct NeighborSelection {
  std::vector<size_t> odd_order;  // processing order over odd vectors (seeded)
  // neighbors[i] holds the NPDD indices chosen for odd point odd_order[i],
  // nearest first; no index repeats anywhere in the selection.
  std::vector<std::vector<size_t>> neighbors;
  std::vector<size_t> selected;  // flattened, in selection order
};

// For each ODD point (seeded order), the k nearest same-class NPDD points by
// Euclidean distance that no earlier point has taken. Both sets must be
// standardized. Throws PoolExhaustedError naming the class when a class pool
// runs dry; k = 0 selects nothing.
NeighborSelection select_neighbors(const FeatureSet& odd_feats, const FeatureSet& npdd_feats,
                                   int k_neighbors, uint64_t seed);

struct ExportedPoint {
  std::string origin;
  int label = 0;
  std::vector<float> feature;
};

// JSONL rows {origin, class, vector}: every ODD point, then every selected
// NPDD neighbor. A metadata sidecar (out_path + ".meta.json") records the
// seed, processing order, pool size, and checkpoint hash.
void export_points(const FeatureSet& odd, const FeatureSet& npdd, const NeighborSelection& sel,
                   const std::string& out_path, const std::string& checkpoint_hash,
                   uint64_t seed);
std::vector<ExportedPoint> read_points(const std::string& path);

// First two principal components via covariance-free power iteration; one
// coordinate pair per input row, rows centered internally.
std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<float>>& rows,
                                          uint64_t seed = 1);

void write_projection_csv(const std::string& path,
                          const std::vector<ExportedPoint>& points,
                          const std::vector<std::array<double, 2>>& coords);

}  // namespace copycat
