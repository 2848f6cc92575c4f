#include "copycat/feature_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "copycat/network.hpp"
#include "copycat/rng.hpp"

namespace copycat {

const char* origin_name(FeatureOrigin o) {
  return o == FeatureOrigin::kOddOl ? "ODD_OL" : "NPDD_SL";
}

FeatureOrigin origin_from(const std::string& name) {
  if (name == "ODD_OL") return FeatureOrigin::kOddOl;
  if (name == "NPDD_SL") return FeatureOrigin::kNpddSl;
  throw ValidationError("unknown feature origin: " + name);
}

namespace {

void check_origin(const DatasetManifest& m, FeatureOrigin origin) {
  const bool ok = origin == FeatureOrigin::kOddOl
                      ? (m.split == Split::kOdd && m.label_source == LabelSource::kOl)
                      : (m.split == Split::kNpdd && m.label_source == LabelSource::kSl);
  if (!ok)
    throw ValidationError(std::string("manifest split/label_source does not match origin ") +
                          origin_name(origin));
}

}  // namespace

FeatureSet extract_feature_set(const Checkpoint& ckpt, const DatasetManifest& manifest,
                               FeatureOrigin origin, int workers) {
  validate_manifest(manifest);
  check_origin(manifest, origin);
  if (workers < 1) workers = 1;
  for (const auto& rec : manifest.records)
    if (!rec.label) throw ValidationError("feature extraction needs a labeled manifest");

  const Network<float> net(ckpt.spec, ckpt.blob, ckpt.mean_size);
  FeatureSet set;
  set.origin = origin;
  set.vectors.resize(manifest.records.size());

  const size_t n = manifest.records.size();
  const size_t nthreads = std::min<size_t>(size_t(workers), std::max<size_t>(n, 1));
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&](size_t t) {
    try {
      for (size_t i = t; i < n; i += nthreads) {
        const auto& rec = manifest.records[i];
        const FloatImage img = load_input_image(rec.ref, ckpt.spec.input_shape);
        set.vectors[i] = {rec.ref, *rec.label, net.extract_features(img)};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return set;
}

void standardize(FeatureSet& set) {
  if (set.vectors.empty()) throw ValidationError("cannot standardize an empty feature set");
  const size_t d = set.vectors[0].feature.size();
  if (d == 0) throw ValidationError("cannot standardize zero-dimensional features");
  for (const auto& v : set.vectors)
    if (v.feature.size() != d) throw ValidationError("feature dimensions differ within a set");

  const double n = double(set.vectors.size());
  set.mean.assign(d, 0.0);
  set.std_dev.assign(d, 0.0);
  for (const auto& v : set.vectors)
    for (size_t j = 0; j < d; ++j) set.mean[j] += v.feature[j];
  for (auto& m : set.mean) m /= n;
  for (const auto& v : set.vectors)
    for (size_t j = 0; j < d; ++j) {
      const double c = v.feature[j] - set.mean[j];
      set.std_dev[j] += c * c;
    }
  for (auto& s : set.std_dev) s = std::max(std::sqrt(s / n), 1e-8);
  for (auto& v : set.vectors)
    for (size_t j = 0; j < d; ++j)
      v.feature[j] = float((v.feature[j] - set.mean[j]) / set.std_dev[j]);
  set.standardized = true;
}

DatasetManifest sample_odd(const DatasetManifest& odd, int per_class, uint64_t seed) {
  validate_manifest(odd);
  if (odd.split != Split::kOdd || odd.label_source != LabelSource::kOl)
    throw ValidationError("sample_odd requires an ODD/OL manifest");
  if (per_class < 1) throw ValidationError("per_class must be at least 1");

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < odd.records.size(); ++i) by_class[*odd.records[i].label].push_back(i);
  std::vector<size_t> chosen;
  for (int cls = 0; cls < odd.num_classes; ++cls) {
    auto it = by_class.find(cls);
    const size_t have = it == by_class.end() ? 0 : it->second.size();
    if (have < size_t(per_class))
      throw ValidationError("class " + std::to_string(cls) + " has " + std::to_string(have) +
                            " samples, need " + std::to_string(per_class));
    std::vector<size_t> idx = it->second;
    Rng rng(derive_seed(seed, "sample-class-" + std::to_string(cls)));
    rng.shuffle(idx);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  DatasetManifest out;
  out.split = odd.split;
  out.label_source = odd.label_source;
  out.num_classes = odd.num_classes;
  for (const size_t i : chosen) out.records.push_back(odd.records[i]);
  return out;
}

NeighborSelection select_neighbors(const FeatureSet& odd_feats, const FeatureSet& npdd_feats,
                                   int k_neighbors, uint64_t seed) {
  if (!odd_feats.standardized || !npdd_feats.standardized)
    throw ValidationError("select_neighbors requires standardized feature sets");
  if (k_neighbors < 0) throw ValidationError("k_neighbors must be non-negative");
  if (odd_feats.vectors.empty()) throw ValidationError("empty ODD feature set");
  const size_t d = odd_feats.vectors[0].feature.size();
  for (const auto& v : npdd_feats.vectors)
    if (v.feature.size() != d) throw ValidationError("feature dimensions differ across sets");

  std::map<int, std::vector<size_t>> pool;
  for (size_t i = 0; i < npdd_feats.vectors.size(); ++i)
    pool[npdd_feats.vectors[i].label].push_back(i);

  NeighborSelection sel;
  sel.odd_order.resize(odd_feats.vectors.size());
  for (size_t i = 0; i < sel.odd_order.size(); ++i) sel.odd_order[i] = i;
  Rng rng(derive_seed(seed, "neighbor-order"));
  rng.shuffle(sel.odd_order);

  std::vector<char> taken(npdd_feats.vectors.size(), 0);
  sel.neighbors.resize(sel.odd_order.size());
  for (size_t pos = 0; pos < sel.odd_order.size(); ++pos) {
    const size_t oi = sel.odd_order[pos];
    const FeatureVector& p = odd_feats.vectors[oi];
    if (k_neighbors == 0) continue;
    auto it = pool.find(p.label);
    std::vector<std::pair<double, size_t>> cand;
    if (it != pool.end()) {
      for (const size_t ni : it->second) {
        if (taken[ni]) continue;
        const auto& q = npdd_feats.vectors[ni].feature;
        double dist = 0.0;
        for (size_t j = 0; j < d; ++j) {
          const double c = double(p.feature[j]) - double(q[j]);
          dist += c * c;
        }
        cand.emplace_back(dist, ni);
      }
    }
    if (cand.size() < size_t(k_neighbors))
      throw PoolExhaustedError(p.label, "class " + std::to_string(p.label) + " has " +
                                            std::to_string(cand.size()) +
                                            " unselected samples, need " +
                                            std::to_string(k_neighbors));
    std::partial_sort(cand.begin(), cand.begin() + k_neighbors, cand.end());
    for (int k = 0; k < k_neighbors; ++k) {
      const size_t ni = cand[size_t(k)].second;
      taken[ni] = 1;
      sel.neighbors[pos].push_back(ni);
      sel.selected.push_back(ni);
    }
  }
  return sel;
}

void export_points(const FeatureSet& odd, const FeatureSet& npdd, const NeighborSelection& sel,
                   const std::string& out_path, const std::string& checkpoint_hash,
                   uint64_t seed) {
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot open for writing: " + out_path);
  size_t rows = 0;
  auto emit = [&](FeatureOrigin origin, const FeatureVector& v) {
    nlohmann::json j{{"origin", origin_name(origin)}, {"class", v.label}};
    nlohmann::json vec = nlohmann::json::array();
    for (const float f : v.feature) vec.push_back(double(f));
    j["vector"] = std::move(vec);
    os << j.dump() << "\n";
    ++rows;
  };
  for (const auto& v : odd.vectors) emit(FeatureOrigin::kOddOl, v);
  for (const size_t ni : sel.selected) emit(FeatureOrigin::kNpddSl, npdd.vectors[ni]);
  if (!os) throw IoError("write failed: " + out_path);
  os.close();

  nlohmann::json meta{{"seed", seed},
                      {"odd_order", sel.odd_order},
                      {"npdd_pool_size", npdd.vectors.size()},
                      {"checkpoint_hash", checkpoint_hash},
                      {"rows", rows}};
  std::ofstream ms(out_path + ".meta.json");
  if (!ms) throw IoError("cannot open for writing: " + out_path + ".meta.json");
  ms << meta.dump(2) << "\n";
  if (!ms) throw IoError("write failed: " + out_path + ".meta.json");
}

std::vector<ExportedPoint> read_points(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<ExportedPoint> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ExportedPoint p;
    p.origin = j.at("origin").get<std::string>();
    origin_from(p.origin);  // validates
    p.label = j.at("class").get<int>();
    for (const auto& v : j.at("vector")) p.feature.push_back(float(v.get<double>()));
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// One principal direction by power iteration on the (implicit) covariance;
// `deflate` removes an already-found direction from every product.
std::vector<double> power_component(const std::vector<std::vector<double>>& centered,
                                    const std::vector<double>* deflate, Rng& rng) {
  const size_t d = centered.empty() ? 0 : centered[0].size();
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  auto orthogonalize = [&](std::vector<double>& u) {
    if (!deflate) return;
    double proj = 0.0;
    for (size_t j = 0; j < d; ++j) proj += u[j] * (*deflate)[j];
    for (size_t j = 0; j < d; ++j) u[j] -= proj * (*deflate)[j];
  };
  auto normalize = [&](std::vector<double>& u) {
    double nrm = 0.0;
    for (const double x : u) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) return false;
    for (auto& x : u) x /= nrm;
    return true;
  };
  orthogonalize(v);
  if (!normalize(v)) return {};
  std::vector<double> u(d);
  for (int iter = 0; iter < 300; ++iter) {
    std::fill(u.begin(), u.end(), 0.0);
    for (const auto& row : centered) {
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += row[j] * v[j];
      for (size_t j = 0; j < d; ++j) u[j] += dot * row[j];
    }
    orthogonalize(u);
    if (!normalize(u)) return {};
    double agree = 0.0;
    for (size_t j = 0; j < d; ++j) agree += u[j] * v[j];
    v = u;
    if (std::abs(std::abs(agree) - 1.0) < 1e-12) break;
  }
  // Deterministic sign: largest-magnitude entry positive.
  size_t arg = 0;
  for (size_t j = 1; j < d; ++j)
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  if (v[arg] < 0.0)
    for (auto& x : v) x = -x;
  return v;
}

}  // namespace

std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<float>>& rows,
                                          uint64_t seed) {
  if (rows.empty()) return {};
  const size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw ValidationError("pca rows have differing dimensions");

  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= double(rows.size());
  std::vector<std::vector<double>> centered(rows.size(), std::vector<double>(d));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < d; ++j) centered[i][j] = double(rows[i][j]) - mean[j];

  Rng rng(derive_seed(seed, "pca"));
  const std::vector<double> v1 = power_component(centered, nullptr, rng);
  const std::vector<double> v2 =
      v1.empty() ? std::vector<double>{} : power_component(centered, &v1, rng);

  std::vector<std::array<double, 2>> coords(rows.size(), {0.0, 0.0});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!v1.empty())
      for (size_t j = 0; j < d; ++j) coords[i][0] += centered[i][j] * v1[j];
    if (!v2.empty())
      for (size_t j = 0; j < d; ++j) coords[i][1] += centered[i][j] * v2[j];
  }
  return coords;
}

void write_projection_csv(const std::string& path, const std::vector<ExportedPoint>& points,
                          const std::vector<std::array<double, 2>>& coords) {
  if (points.size() != coords.size())
    throw ValidationError("projection rows do not match point rows");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "origin,class,x,y\n";
  char buf[80];
  for (size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", coords[i][0], coords[i][1]);
    os << points[i].origin << "," << points[i].label << "," << buf << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace copycat
