// Command-line surface: one subcommand per pipeline stage. Flags override
// config-file values, which override defaults; all randomness derives from
// the single --seed via named substreams, so every stage reruns bit-identically.
//
// Black-box discipline at this layer: the attack-stage subcommands (steal,
// balance, train-copycat, finetune, curve, robustness) refuse ODD manifests
// outright. Only train-target and serve-oracle consume ODD labels; eval and
// lrp read TDD labels, and features reads ODD labels for the experimenter's
// coverage analysis, never feeding any of it back into an attack stage.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "copycat/attack.hpp"
#include "copycat/economics.hpp"
#include "copycat/evaluation.hpp"
#include "copycat/feature_space.hpp"
#include "copycat/glyphs.hpp"
#include "copycat/lrp.hpp"
#include "copycat/manifest.hpp"
#include "copycat/model.hpp"
#include "copycat/oracle.hpp"
#include "copycat/rng.hpp"
#include "copycat/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace copycat;

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }

struct Global {
  std::string workdir;
  std::string config_path;
  uint64_t seed = 1;
  int workers = 1;
  json config = json::object();
};

// Config lookup: section named after the subcommand first, then top level.
const json* find_key(const json& cfg, const std::string& sub, const std::string& key) {
  if (cfg.contains(sub) && cfg[sub].is_object() && cfg[sub].contains(key))
    return &cfg[sub][key];
  if (cfg.contains(key)) return &cfg[key];
  return nullptr;
}

template <typename T>
void merge_cfg(const CLI::App* app, const Global& g, const std::string& flag, T& value) {
  if (app->count("--" + flag) > 0) return;
  if (const json* v = find_key(g.config, app->get_name(), flag)) value = v->get<T>();
}

std::string resolve(const Global& g, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(g.workdir) / path).string();
}

std::vector<int64_t> parse_int_list(const std::string& text) {
  std::vector<int64_t> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  if (out.empty()) throw ValidationError("expected a comma-separated integer list");
  return out;
}

std::vector<std::string> parse_str_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ModelSpec spec_for(const std::string& arch, int num_classes, InputShape shape) {
  if (arch == "large") return large_spec(num_classes, shape);
  if (arch == "small") return small_spec(num_classes, shape);
  throw ValidationError("unknown architecture: " + arch + " (expected large or small)");
}

void emit(const json& j) { std::cout << j.dump() << "\n"; }

// Timestamps live in a sidecar so report files stay byte-identical on rerun.
void write_run_sidecar(const Global& g, const std::string& sub) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  json j{{"subcommand", sub}, {"timestamp", stamp}, {"seed", g.seed}};
  std::ofstream os(resolve(g, sub + "_run.meta.json"));
  if (os) os << j.dump(2) << "\n";
}

struct TrainFlags {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_gamma = 0.1;
  int lr_step = 0;
  int epochs = 10;
  int batch = 32;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--lr", f.lr, "learning rate");
  sub->add_option("--momentum", f.momentum, "SGD momentum");
  sub->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
  sub->add_option("--lr-gamma", f.lr_gamma, "step-down factor");
  sub->add_option("--lr-step", f.lr_step, "iterations per step-down (0 = two epochs)");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--batch", f.batch, "batch size");
}

void merge_train_flags(const CLI::App* sub, const Global& g, TrainFlags& f) {
  merge_cfg(sub, g, "lr", f.lr);
  merge_cfg(sub, g, "momentum", f.momentum);
  merge_cfg(sub, g, "weight-decay", f.weight_decay);
  merge_cfg(sub, g, "lr-gamma", f.lr_gamma);
  merge_cfg(sub, g, "lr-step", f.lr_step);
  merge_cfg(sub, g, "epochs", f.epochs);
  merge_cfg(sub, g, "batch", f.batch);
}

TrainConfig to_train_config(const TrainFlags& f, uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = f.lr;
  cfg.momentum = f.momentum;
  cfg.weight_decay = f.weight_decay;
  cfg.lr_gamma = f.lr_gamma;
  cfg.lr_step_iters = f.lr_step;
  cfg.max_epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.seed = seed;
  return cfg;
}

struct ShapeFlags {
  int height = 32;
  int width = 32;
  int channels = 1;
};

void add_shape_flags(CLI::App* sub, ShapeFlags& f) {
  sub->add_option("--input-height", f.height, "model input height");
  sub->add_option("--input-width", f.width, "model input width");
  sub->add_option("--input-channels", f.channels, "model input channels (1 or 3)");
}

InputShape to_shape(const ShapeFlags& f) { return InputShape{f.height, f.width, f.channels}; }

double last_or_zero(const std::vector<double>& v) { return v.empty() ? 0.0 : v.back(); }

struct OracleFlags {
  std::string target_ckpt;
  std::string endpoint;
  int64_t budget = -1;  // -1 = unlimited
  std::string price = "0";
  std::string oracle_id = "oracle";
};

void add_oracle_flags(CLI::App* sub, OracleFlags& f) {
  sub->add_option("--target-ckpt", f.target_ckpt, "target checkpoint for a local oracle");
  sub->add_option("--endpoint", f.endpoint, "remote oracle base URL");
  sub->add_option("--budget", f.budget, "query budget (-1 = unlimited)");
  sub->add_option("--price", f.price, "price per 1000 queries, e.g. 1.00");
  sub->add_option("--oracle-id", f.oracle_id, "oracle identifier recorded in stolen labels");
}

std::unique_ptr<Oracle> open_oracle(const Global& g, const OracleFlags& f) {
  const std::optional<int64_t> budget =
      f.budget < 0 ? std::nullopt : std::optional<int64_t>(f.budget);
  const Rational price = Rational::parse(f.price);
  if (!f.endpoint.empty() && !f.target_ckpt.empty())
    throw ValidationError("pass either --target-ckpt or --endpoint, not both");
  if (!f.endpoint.empty())
    return std::make_unique<Oracle>(f.oracle_id, f.endpoint, budget, price);
  if (f.target_ckpt.empty())
    throw ValidationError("an oracle needs --target-ckpt or --endpoint");
  const Checkpoint ckpt = load_checkpoint(resolve(g, f.target_ckpt));
  return std::make_unique<Oracle>(f.oracle_id, ckpt, budget, price);
}

DatasetManifest read_manifest_at(const Global& g, const std::string& path) {
  return read_manifest(resolve(g, path));
}

void forbid_odd(const DatasetManifest& m, const std::string& what) {
  if (m.split == Split::kOdd)
    throw ValidationError(what + " must never be an ODD manifest (black-box discipline)");
}

// ---------------------------------------------------------------- train-target
int run_train_target(const Global& g, const std::string& data, const std::string& arch,
                     const std::string& out, const TrainFlags& tf, const ShapeFlags& sf,
                     bool subtract_mean) {
  const DatasetManifest odd = read_manifest_at(g, data);
  if (odd.split != Split::kOdd || odd.label_source != LabelSource::kOl)
    throw ValidationError("train-target expects an ODD/OL manifest");
  TrainConfig cfg = to_train_config(tf, derive_seed(g.seed, "train-target"));
  cfg.subtract_mean = subtract_mean;
  const ModelSpec spec = spec_for(arch, odd.num_classes, to_shape(sf));
  TrainStats stats;
  const Checkpoint init = build_model(spec, cfg.seed);
  const Checkpoint trained = train(init, odd, cfg, &stats);
  save_checkpoint(resolve(g, out), trained);
  emit(json{{"checkpoint", out},
            {"content_hash", trained.content_hash},
            {"epochs", trained.epochs_completed},
            {"final_loss", last_or_zero(stats.epoch_loss)},
            {"final_accuracy", last_or_zero(stats.epoch_accuracy)}});
  return 0;
}

// ---------------------------------------------------------------- serve-oracle
int run_serve(const Global& g, const std::string& ckpt_path, const std::string& host, int port,
              double rate_limit) {
  const Checkpoint ckpt = load_checkpoint(resolve(g, ckpt_path));
  ServeOptions options;
  options.rate_limit_qps = rate_limit;
  OracleServer server(ckpt, options);
  server.start(host, port);
  emit(json{{"host", host}, {"port", server.port()}});
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  emit(json{{"requests_served", server.requests_served()}});
  return 0;
}

// ----------------------------------------------------------------------- steal
int run_steal(const Global& g, const OracleFlags& of, const std::string& pool_path,
              int64_t count, const std::string& out) {
  const DatasetManifest pool = read_manifest_at(g, pool_path);
  forbid_odd(pool, "a query pool");
  auto oracle = open_oracle(g, of);
  const auto stolen =
      steal_labels(*oracle, pool, count, derive_seed(g.seed, "steal"), g.workers);
  write_stolen(resolve(g, out), stolen);
  emit(json{{"stolen", stolen.size()},
            {"budget_used", oracle->used()},
            {"cost", oracle->accumulated_cost().to_decimal_string()}});
  return 0;
}

// --------------------------------------------------------------------- balance
int run_balance(const Global& g, const std::string& stolen_path, int classes,
                int target_per_class, const std::string& out, const std::string& report_path) {
  const auto stolen = read_stolen(resolve(g, stolen_path));
  BalanceReport report;
  const DatasetManifest fake =
      build_fake_dataset(stolen, classes, target_per_class, derive_seed(g.seed, "balance"),
                         &report);
  write_manifest(resolve(g, out), fake);
  if (!report_path.empty()) write_balance_report(resolve(g, report_path), report);
  emit(json{{"records", fake.size()},
            {"target_per_class", report.target_per_class},
            {"replicated", report.replicated},
            {"eliminated", report.eliminated}});
  return 0;
}

// --------------------------------------------------------------- train-copycat
int run_train_copycat(const Global& g, const std::string& fake_path, const std::string& arch,
                      const std::string& out, const TrainFlags& tf, const ShapeFlags& sf) {
  const DatasetManifest fake = read_manifest_at(g, fake_path);
  forbid_odd(fake, "copycat training data");
  const TrainConfig cfg = to_train_config(tf, derive_seed(g.seed, "train-copycat"));
  const ModelSpec spec = spec_for(arch, fake.num_classes, to_shape(sf));
  TrainStats stats;
  const Checkpoint ckpt = train_copycat(fake, spec, cfg, &stats);
  save_checkpoint(resolve(g, out), ckpt);
  emit(json{{"checkpoint", out},
            {"content_hash", ckpt.content_hash},
            {"final_loss", last_or_zero(stats.epoch_loss)},
            {"final_accuracy", last_or_zero(stats.epoch_accuracy)}});
  return 0;
}

// -------------------------------------------------------------------- finetune
int run_finetune(const Global& g, const std::string& ckpt_path, const std::string& data_path,
                 const std::string& out, const TrainFlags& tf) {
  const Checkpoint ckpt = load_checkpoint(resolve(g, ckpt_path));
  const DatasetManifest pdd_sl = read_manifest_at(g, data_path);
  forbid_odd(pdd_sl, "fine-tuning data");
  const TrainConfig cfg = to_train_config(tf, derive_seed(g.seed, "finetune"));
  TrainStats stats;
  const Checkpoint tuned = finetune(ckpt, pdd_sl, cfg, &stats);
  save_checkpoint(resolve(g, out), tuned);
  emit(json{{"checkpoint", out},
            {"content_hash", tuned.content_hash},
            {"final_loss", last_or_zero(stats.epoch_loss)},
            {"final_accuracy", last_or_zero(stats.epoch_accuracy)}});
  return 0;
}

// ------------------------------------------------------------------------ eval
int run_eval(const Global& g, const std::string& ckpt_path, const std::string& tdd_path,
             double target_accuracy, const std::string& target_ckpt,
             double baseline_accuracy, const std::string& baseline_ckpt,
             const std::string& stolen_path, const std::string& out,
             const std::string& confusion_csv) {
  const DatasetManifest tdd = read_manifest_at(g, tdd_path);
  if (tdd.split != Split::kTdd || tdd.label_source != LabelSource::kOl)
    throw ValidationError("eval expects a TDD/OL manifest");
  const Checkpoint ckpt = load_checkpoint(resolve(g, ckpt_path));

  double target_acc = target_accuracy;
  if (target_acc <= 0.0) {
    if (target_ckpt.empty())
      throw ValidationError("pass --target-accuracy or --target-ckpt");
    target_acc = evaluate_accuracy(load_checkpoint(resolve(g, target_ckpt)), tdd);
  }
  std::optional<double> baseline;
  if (baseline_accuracy > 0.0)
    baseline = baseline_accuracy;
  else if (!baseline_ckpt.empty())
    baseline = evaluate_accuracy(load_checkpoint(resolve(g, baseline_ckpt)), tdd);

  std::vector<int> stolen_labels;
  if (!stolen_path.empty())
    for (const auto& rec : read_stolen(resolve(g, stolen_path)))
      stolen_labels.push_back(rec.hard_label);

  auto [preds, truths] = predict_manifest(ckpt, tdd);
  const CopyReport report = make_copy_report(target_acc, baseline, preds, truths,
                                             tdd.num_classes, stolen_labels);
  write_copy_report(resolve(g, out), report);
  if (!confusion_csv.empty()) write_confusion_csv(resolve(g, confusion_csv), report.confusion);
  emit(json{{"copycat_accuracy", report.copycat_accuracy},
            {"target_accuracy", report.target_accuracy},
            {"perf_over_target", report.perf_over_target}});
  return 0;
}

// ----------------------------------------------------------------------- curve
int run_curve(const Global& g, const OracleFlags& of, const std::string& pool_path,
              const std::string& sizes_text, const std::string& tdd_path,
              double target_accuracy, double baseline_accuracy, const std::string& pdd_path,
              const std::string& run_dir, const std::string& arch, const TrainFlags& tf,
              const ShapeFlags& sf, int ft_epochs, double ft_lr) {
  AttackPlan plan;
  plan.run_dir = resolve(g, run_dir);
  plan.surrogate_pool = read_manifest_at(g, pool_path);
  forbid_odd(plan.surrogate_pool, "the surrogate pool");
  if (!pdd_path.empty()) {
    plan.pdd_pool = read_manifest_at(g, pdd_path);
    forbid_odd(*plan.pdd_pool, "the PDD pool");
  }
  plan.query_sizes = parse_int_list(sizes_text);
  plan.seed = derive_seed(g.seed, "curve");
  plan.train_config = to_train_config(tf, plan.seed);

  EvalContext eval;
  eval.tdd = read_manifest_at(g, tdd_path);
  auto oracle = open_oracle(g, of);
  eval.target_accuracy = target_accuracy;
  if (eval.target_accuracy <= 0.0) {
    if (of.target_ckpt.empty())
      throw ValidationError("pass --target-accuracy (or --target-ckpt for a local oracle)");
    eval.target_accuracy =
        evaluate_accuracy(load_checkpoint(resolve(g, of.target_ckpt)), eval.tdd);
  }
  if (baseline_accuracy > 0.0) eval.baseline_accuracy = baseline_accuracy;
  plan.copycat_spec = spec_for(arch, eval.tdd.num_classes, to_shape(sf));
  if (plan.pdd_pool) {
    TrainConfig ft = default_finetune_config(plan.train_config);
    if (ft_epochs >= 0) ft.max_epochs = ft_epochs;
    if (ft_lr > 0.0) ft.learning_rate = ft_lr;
    plan.finetune_config = ft;
  }

  const AttackRun run = run_data_curve(plan, *oracle, eval, g.workers);
  json points = json::array();
  for (const auto& p : run.curve) {
    json row{{"queries", p.query_count}, {"perf_over_target", p.perf_over_target}};
    if (p.finetuned_perf) row["finetuned_perf"] = *p.finetuned_perf;
    points.push_back(row);
  }
  emit(json{{"run_dir", run_dir},
            {"queries_used", oracle->used()},
            {"cost", oracle->accumulated_cost().to_decimal_string()},
            {"curve", points}});
  return 0;
}

// ------------------------------------------------------------------ robustness
// Targets are trained up front with train-target (one per seed); this stage
// only attacks them, so it never touches ODD data.
int run_robustness(const Global& g, const std::string& target_ckpts_text,
                   const std::string& seeds_text, const std::string& pool_path, int64_t count,
                   const std::string& tdd_path, const std::string& arch, const TrainFlags& tf,
                   const ShapeFlags& sf, const std::string& out) {
  const std::vector<std::string> ckpt_paths = parse_str_list(target_ckpts_text);
  const std::vector<int64_t> seed_list = parse_int_list(seeds_text);
  if (ckpt_paths.size() != seed_list.size())
    throw ValidationError("--target-ckpts and --seeds must have equal lengths");
  const DatasetManifest pool = read_manifest_at(g, pool_path);
  forbid_odd(pool, "the surrogate pool");
  const DatasetManifest tdd = read_manifest_at(g, tdd_path);
  if (tdd.split != Split::kTdd || tdd.label_source != LabelSource::kOl)
    throw ValidationError("robustness expects a TDD/OL manifest");

  std::vector<uint64_t> seeds(seed_list.begin(), seed_list.end());
  size_t idx = 0;
  auto runner = [&](uint64_t seed) {
    const Checkpoint target = load_checkpoint(resolve(g, ckpt_paths[idx++]));
    Oracle oracle("robustness-" + std::to_string(seed), target, std::nullopt, Rational(0));
    const auto stolen = steal_labels(oracle, pool, count, seed, g.workers);
    const DatasetManifest fake =
        build_fake_dataset(stolen, oracle.num_classes(), 0, derive_seed(seed, "balance"));
    TrainConfig cfg = to_train_config(tf, derive_seed(seed, "copycat"));
    const ModelSpec spec = spec_for(arch, oracle.num_classes(), to_shape(sf));
    const Checkpoint copycat = train_copycat(fake, spec, cfg);
    const double target_acc = evaluate_accuracy(target, tdd);
    const double copy_acc = evaluate_accuracy(copycat, tdd);
    return copy_performance(copy_acc, target_acc);
  };
  const RobustnessSummary summary = robustness(seeds, runner);
  write_robustness(resolve(g, out), summary);
  json runs = json::array();
  for (const auto& [seed, perf] : summary.runs)
    runs.push_back(json{{"seed", seed}, {"perf_over_target", perf}});
  emit(json{{"mean", summary.mean}, {"std", summary.std_dev}, {"runs", runs}});
  return 0;
}

// ------------------------------------------------------------------------- lrp
int run_lrp(const Global& g, const std::string& ckpt_path, const std::string& target_ckpt,
            const std::string& copycat_ckpt, const std::string& image_path, int explain_class,
            int truth, const std::string& out_prefix) {
  const bool compare_mode = !target_ckpt.empty() && !copycat_ckpt.empty();
  if (!compare_mode && ckpt_path.empty())
    throw ValidationError("pass --ckpt, or --target-ckpt with --copycat-ckpt");
  const std::string img_path = resolve(g, image_path);

  if (compare_mode) {
    if (truth < 0) throw ValidationError("comparison needs --truth");
    const Checkpoint target = load_checkpoint(resolve(g, target_ckpt));
    const Checkpoint copycat = load_checkpoint(resolve(g, copycat_ckpt));
    const FloatImage img = load_input_image(img_path, target.spec.input_shape);
    const HeatmapComparison cmp = compare(target, copycat, img, truth, 1e-6, image_path);
    const std::string base = resolve(g, out_prefix);
    write_heatmap_raw(base + ".target", cmp.target_map);
    write_heatmap_png(base + ".target.png", cmp.target_map);
    write_heatmap_raw(base + ".copycat", cmp.copycat_map);
    write_heatmap_png(base + ".copycat.png", cmp.copycat_map);
    const json j{{"similarity", cmp.similarity},
                 {"agreement", agreement_name(cmp.agreement)},
                 {"target_class", cmp.target_map.explained_class},
                 {"copycat_class", cmp.copycat_map.explained_class}};
    std::ofstream os(base + ".comparison.json");
    if (!os) throw IoError("cannot open for writing: " + base + ".comparison.json");
    os << j.dump(2) << "\n";
    emit(j);
    return 0;
  }

  const Checkpoint ckpt = load_checkpoint(resolve(g, ckpt_path));
  const FloatImage img = load_input_image(img_path, ckpt.spec.input_shape);
  const std::optional<int> cls =
      explain_class >= 0 ? std::optional<int>(explain_class) : std::nullopt;
  const Heatmap map = relevance(ckpt, img, cls, 1e-6, image_path);
  const std::string base = resolve(g, out_prefix);
  write_heatmap_raw(base, map);
  write_heatmap_png(base + ".png", map);
  double sum = 0.0;
  for (const double v : map.values) sum += v;
  emit(json{{"explained_class", map.explained_class},
            {"explained_score", map.explained_score},
            {"relevance_sum", sum}});
  return 0;
}

// -------------------------------------------------------------------- features
int run_features(const Global& g, const std::string& ckpt_path, const std::string& odd_path,
                 const std::string& npdd_path, int per_class, int neighbors, int64_t pool_size,
                 const std::string& out, const std::string& pca_csv) {
  const Checkpoint ckpt = load_checkpoint(resolve(g, ckpt_path));
  const DatasetManifest odd_full = read_manifest_at(g, odd_path);
  DatasetManifest npdd = read_manifest_at(g, npdd_path);
  const uint64_t stage_seed = derive_seed(g.seed, "features");

  const DatasetManifest odd_sample =
      sample_odd(odd_full, per_class, derive_seed(stage_seed, "sample"));
  if (pool_size > 0 && npdd.size() > size_t(pool_size)) {
    std::vector<size_t> order(npdd.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(stage_seed, "pool"));
    rng.shuffle(order);
    order.resize(size_t(pool_size));
    std::sort(order.begin(), order.end());
    DatasetManifest subset;
    subset.split = npdd.split;
    subset.label_source = npdd.label_source;
    subset.num_classes = npdd.num_classes;
    for (const size_t i : order) subset.records.push_back(npdd.records[i]);
    npdd = std::move(subset);
  }

  FeatureSet odd_feats =
      extract_feature_set(ckpt, odd_sample, FeatureOrigin::kOddOl, g.workers);
  FeatureSet npdd_feats = extract_feature_set(ckpt, npdd, FeatureOrigin::kNpddSl, g.workers);
  standardize(odd_feats);
  standardize(npdd_feats);
  const NeighborSelection sel =
      select_neighbors(odd_feats, npdd_feats, neighbors, derive_seed(stage_seed, "neighbors"));
  const std::string out_path = resolve(g, out);
  export_points(odd_feats, npdd_feats, sel, out_path, ckpt.content_hash, stage_seed);

  if (!pca_csv.empty()) {
    const auto points = read_points(out_path);
    std::vector<std::vector<float>> rows;
    for (const auto& p : points) rows.push_back(p.feature);
    write_projection_csv(resolve(g, pca_csv), points, pca_2d(rows, stage_seed));
  }
  emit(json{{"odd_points", odd_feats.vectors.size()},
            {"npdd_pool", npdd_feats.vectors.size()},
            {"selected", sel.selected.size()},
            {"rows", odd_feats.vectors.size() + sel.selected.size()}});
  return 0;
}

// ------------------------------------------------------------------------ cost
int run_cost(const Global& g, const std::string& labeling, int64_t queries,
             const std::string& price, int64_t odd_size, const std::string& out,
             const std::string& csv, const std::string& problem) {
  const Rational labeling_cost = Rational::parse(labeling);
  const Rational break_even = minimum_batch_price(labeling_cost, queries);
  json j{{"labeling_cost", labeling_cost.to_decimal_string()},
         {"npdd_size", queries},
         {"minimum_batch_price", break_even.to_decimal_string()}};
  if (!price.empty()) {
    CostModel model;
    model.price_per_batch = Rational::parse(price);
    model.labeling_cost = labeling_cost;
    model.odd_size = odd_size;
    model.npdd_size = queries;
    const ViabilityReport report = viability_report(model);
    j["price_per_batch"] = model.price_per_batch.to_decimal_string();
    j["attack_cost"] = report.attack_cost.to_decimal_string();
    j["viable"] = report.viable;
    if (!out.empty()) write_viability_json(resolve(g, out), model, report);
  } else if (!out.empty()) {
    std::ofstream os(resolve(g, out));
    if (!os) throw IoError("cannot open for writing: " + out);
    os << j.dump(2) << "\n";
  }
  if (!csv.empty()) {
    write_cost_csv(resolve(g, csv),
                   {CostTableRow{problem.empty() ? "problem" : problem, odd_size, labeling_cost,
                                 queries}});
  }
  emit(j);
  return 0;
}

// -------------------------------------------------------------------- gen-data
int run_gen_data(const Global& g, const std::string& domain, int per_class, int count,
                 const std::string& out_dir, bool labeled, int classes,
                 const std::string& manifest_out, const ShapeFlags& sf) {
  const uint64_t stage_seed = derive_seed(g.seed, "gen-data");
  DatasetManifest m;
  if (domain == "random") {
    if (count < 1) throw ValidationError("--count must be >= 1 for random pixels");
    m = generate_random_pixels(count, to_shape(sf), stage_seed, resolve(g, out_dir), classes);
  } else {
    const GlyphDomain d = glyph_domain_from(domain);
    m = generate_glyph_corpus(d, per_class, to_shape(sf), stage_seed, resolve(g, out_dir),
                              labeled, labeled ? -1 : classes);
  }
  write_manifest(resolve(g, manifest_out), m);
  emit(json{{"records", m.size()},
            {"split", split_name(m.split)},
            {"label_source", label_source_name(m.label_source)},
            {"manifest", manifest_out}});
  return 0;
}

// ------------------------------------------------------------------ split-data
int run_split_data(const Global& g, const std::string& data, double odd_frac, double pdd_frac,
                   double tdd_frac, const std::string& out_odd, const std::string& out_pdd,
                   const std::string& out_tdd) {
  const DatasetManifest full = read_manifest_at(g, data);
  SplitFractions fractions{odd_frac, pdd_frac, tdd_frac};
  const ProblemSplits splits = split_problem(full, fractions, derive_seed(g.seed, "split"));
  write_manifest(resolve(g, out_odd), splits.odd);
  write_manifest(resolve(g, out_pdd), splits.pdd);
  write_manifest(resolve(g, out_tdd), splits.tdd);
  emit(json{{"odd", splits.odd.size()}, {"pdd", splits.pdd.size()}, {"tdd", splits.tdd.size()}});
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const MissingClassError*>(&e)) return "missing_class";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const BudgetExceededError*>(&e)) return "budget_exceeded";
  if (dynamic_cast<const PoolExhaustedError*>(&e)) return "pool_exhausted";
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const TrainingDivergedError*>(&e)) return "training_diverged";
  if (dynamic_cast<const UnsupportedLayerError*>(&e)) return "unsupported_layer";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box model copy framework"};
  app.require_subcommand(1);

  Global g;
  const char* env_workdir = std::getenv("COPYCAT_WORKDIR");
  g.workdir = env_workdir ? env_workdir : ".";
  app.add_option("--config", g.config_path, "JSON config file (flags override it)");
  app.add_option("--seed", g.seed, "root seed; every stage derives a named substream");
  app.add_option("--workers", g.workers, "worker thread bound");
  app.add_option("--workdir", g.workdir, "base directory for relative paths");

  // train-target
  auto* tt = app.add_subcommand("train-target", "train the target model on ODD/OL data");
  std::string tt_data, tt_arch = "large", tt_out = "target.ckpt";
  bool tt_mean = false;
  TrainFlags tt_tf;
  ShapeFlags tt_sf;
  tt->add_option("--data", tt_data, "ODD/OL manifest")->required();
  tt->add_option("--arch", tt_arch, "large or small");
  tt->add_option("--out", tt_out, "output checkpoint path");
  tt->add_flag("--subtract-mean", tt_mean, "subtract the training-set mean image");
  add_train_flags(tt, tt_tf);
  add_shape_flags(tt, tt_sf);

  // serve-oracle
  auto* so = app.add_subcommand("serve-oracle", "serve a checkpoint as a hard-label HTTP API");
  std::string so_ckpt, so_host = "127.0.0.1";
  int so_port = 8787;
  double so_rate = 0.0;
  so->add_option("--ckpt", so_ckpt, "checkpoint to serve")->required();
  so->add_option("--host", so_host, "bind host");
  so->add_option("--port", so_port, "bind port (0 = any free port)");
  so->add_option("--rate-limit", so_rate, "queries per second (0 = unlimited)");

  // steal
  auto* st = app.add_subcommand("steal", "buy hard labels for pool images from the oracle");
  OracleFlags st_of;
  std::string st_pool, st_out = "stolen_labels.jsonl";
  int64_t st_count = 0;
  add_oracle_flags(st, st_of);
  st->add_option("--pool", st_pool, "NPDD or PDD manifest to draw from")->required();
  st->add_option("--count", st_count, "number of queries")->required();
  st->add_option("--out", st_out, "stolen-labels JSONL path");

  // balance
  auto* ba = app.add_subcommand("balance", "balance stolen labels into a fake dataset");
  std::string ba_stolen, ba_out = "fake.jsonl", ba_report = "balance_report.json";
  int ba_classes = 0, ba_target = 0;
  ba->add_option("--stolen", ba_stolen, "stolen-labels JSONL")->required();
  ba->add_option("--classes", ba_classes, "number of classes")->required();
  ba->add_option("--target-per-class", ba_target, "records per class (0 = lower median)");
  ba->add_option("--out", ba_out, "balanced manifest path");
  ba->add_option("--report", ba_report, "balance report path");

  // train-copycat
  auto* tc = app.add_subcommand("train-copycat", "train a copycat on stolen labels");
  std::string tc_fake, tc_arch = "large", tc_out = "copycat.ckpt";
  TrainFlags tc_tf;
  ShapeFlags tc_sf;
  tc->add_option("--fake", tc_fake, "balanced SL manifest")->required();
  tc->add_option("--arch", tc_arch, "large or small");
  tc->add_option("--out", tc_out, "output checkpoint path");
  add_train_flags(tc, tc_tf);
  add_shape_flags(tc, tc_sf);

  // finetune
  auto* ft = app.add_subcommand("finetune", "continue training a copycat on PDD-SL data");
  std::string ft_ckpt, ft_data, ft_out = "copycat_finetuned.ckpt";
  TrainFlags ft_tf;
  ft_tf.lr = 0.001;
  ft_tf.epochs = 2;
  ft->add_option("--ckpt", ft_ckpt, "copycat checkpoint to start from")->required();
  ft->add_option("--data", ft_data, "PDD-SL manifest")->required();
  ft->add_option("--out", ft_out, "output checkpoint path");
  add_train_flags(ft, ft_tf);

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on TDD and write a copy report");
  std::string ev_ckpt, ev_tdd, ev_target_ckpt, ev_baseline_ckpt, ev_stolen;
  std::string ev_out = "report.json", ev_confusion;
  double ev_target_acc = 0.0, ev_baseline_acc = 0.0;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--tdd", ev_tdd, "TDD/OL manifest")->required();
  ev->add_option("--target-accuracy", ev_target_acc, "precomputed target macro accuracy");
  ev->add_option("--target-ckpt", ev_target_ckpt, "target checkpoint to score instead");
  ev->add_option("--baseline-accuracy", ev_baseline_acc, "precomputed baseline accuracy");
  ev->add_option("--baseline-ckpt", ev_baseline_ckpt, "baseline checkpoint to score instead");
  ev->add_option("--stolen", ev_stolen, "stolen labels for the distribution section");
  ev->add_option("--out", ev_out, "copy report path");
  ev->add_option("--confusion-csv", ev_confusion, "confusion matrix CSV path");

  // curve
  auto* cu = app.add_subcommand("curve", "run the data-curve experiment");
  OracleFlags cu_of;
  std::string cu_pool, cu_sizes = "1000,5000,20000", cu_tdd, cu_pdd;
  std::string cu_run_dir = "run", cu_arch = "large";
  double cu_target_acc = 0.0, cu_baseline_acc = 0.0, cu_ft_lr = 0.0;
  int cu_ft_epochs = -1;
  TrainFlags cu_tf;
  ShapeFlags cu_sf;
  add_oracle_flags(cu, cu_of);
  cu->add_option("--pool", cu_pool, "NPDD surrogate manifest")->required();
  cu->add_option("--sizes", cu_sizes, "comma-separated query sizes");
  cu->add_option("--tdd", cu_tdd, "TDD/OL manifest")->required();
  cu->add_option("--target-accuracy", cu_target_acc, "precomputed target macro accuracy");
  cu->add_option("--baseline-accuracy", cu_baseline_acc, "optional baseline accuracy");
  cu->add_option("--pdd", cu_pdd, "optional PDD pool for fine-tuning");
  cu->add_option("--run-dir", cu_run_dir, "output directory");
  cu->add_option("--arch", cu_arch, "copycat architecture");
  cu->add_option("--finetune-epochs", cu_ft_epochs, "fine-tune epochs (default 2)");
  cu->add_option("--finetune-lr", cu_ft_lr, "fine-tune learning rate (default 0.1x base)");
  add_train_flags(cu, cu_tf);
  add_shape_flags(cu, cu_sf);

  // robustness
  auto* ro = app.add_subcommand("robustness", "repeat the copy attack across seeds");
  std::string ro_ckpts, ro_seeds = "1,2,3", ro_pool, ro_tdd, ro_arch = "large";
  std::string ro_out = "robustness.json";
  int64_t ro_count = 20000;
  TrainFlags ro_tf;
  ShapeFlags ro_sf;
  ro->add_option("--target-ckpts", ro_ckpts, "comma-separated per-seed target checkpoints")
      ->required();
  ro->add_option("--seeds", ro_seeds, "comma-separated seeds");
  ro->add_option("--pool", ro_pool, "NPDD surrogate manifest")->required();
  ro->add_option("--count", ro_count, "queries per run");
  ro->add_option("--tdd", ro_tdd, "TDD/OL manifest")->required();
  ro->add_option("--arch", ro_arch, "copycat architecture");
  ro->add_option("--out", ro_out, "summary JSON path");
  add_train_flags(ro, ro_tf);
  add_shape_flags(ro, ro_sf);

  // lrp
  auto* lr = app.add_subcommand("lrp", "relevance heatmaps for one image");
  std::string lr_ckpt, lr_target, lr_copycat, lr_image, lr_prefix = "heatmap";
  int lr_class = -1, lr_truth = -1;
  lr->add_option("--ckpt", lr_ckpt, "single checkpoint to explain");
  lr->add_option("--target-ckpt", lr_target, "target checkpoint (comparison mode)");
  lr->add_option("--copycat-ckpt", lr_copycat, "copycat checkpoint (comparison mode)");
  lr->add_option("--image", lr_image, "input PNG")->required();
  lr->add_option("--class", lr_class, "class to explain (default: predicted)");
  lr->add_option("--truth", lr_truth, "true class (comparison mode)");
  lr->add_option("--out-prefix", lr_prefix, "output path prefix");

  // features
  auto* fe = app.add_subcommand("features", "penultimate-feature coverage analysis");
  std::string fe_ckpt, fe_odd, fe_npdd, fe_out = "points.jsonl", fe_pca;
  int fe_per_class = 100, fe_neighbors = 3;
  int64_t fe_pool = 20000;
  fe->add_option("--ckpt", fe_ckpt, "target checkpoint")->required();
  fe->add_option("--odd", fe_odd, "ODD/OL manifest")->required();
  fe->add_option("--npdd-sl", fe_npdd, "NPDD/SL manifest")->required();
  fe->add_option("--per-class", fe_per_class, "ODD samples per class");
  fe->add_option("--neighbors", fe_neighbors, "neighbors per ODD point");
  fe->add_option("--pool-size", fe_pool, "NPDD pool subset size (0 = all)");
  fe->add_option("--out", fe_out, "points JSONL path");
  fe->add_option("--pca", fe_pca, "optional 2-D projection CSV path");

  // cost
  auto* co = app.add_subcommand("cost", "attack-economics arithmetic");
  std::string co_labeling, co_price, co_out, co_csv, co_problem;
  int64_t co_queries = 0, co_odd = 0;
  co->add_option("--labeling", co_labeling, "ODD annotation cost, e.g. 1900 or 1,900.00")
      ->required();
  co->add_option("--queries", co_queries, "queries needed for a successful copy")->required();
  co->add_option("--price", co_price, "actual price per 1000 queries (enables the verdict)");
  co->add_option("--odd-size", co_odd, "ODD size for the report");
  co->add_option("--out", co_out, "viability report JSON path");
  co->add_option("--csv", co_csv, "cost table CSV path");
  co->add_option("--problem", co_problem, "problem name for the CSV row");

  // gen-data
  auto* gd = app.add_subcommand("gen-data", "generate a synthetic image corpus");
  std::string gd_domain = "digits", gd_dir, gd_manifest = "manifest.jsonl";
  int gd_per_class = 100, gd_count = 0, gd_classes = 10;
  bool gd_labeled = false, gd_unlabeled = false;
  ShapeFlags gd_sf;
  gd->add_option("--domain", gd_domain, "digits, letters, shapes, or random");
  gd->add_option("--per-class", gd_per_class, "samples per class (glyph domains)");
  gd->add_option("--count", gd_count, "total samples (random domain)");
  gd->add_option("--out-dir", gd_dir, "image output directory")->required();
  gd->add_flag("--labeled", gd_labeled, "emit a labeled PDD/OL pool");
  gd->add_flag("--unlabeled", gd_unlabeled, "emit an unlabeled NPDD pool");
  gd->add_option("--classes", gd_classes, "problem class count stamped on unlabeled pools");
  gd->add_option("--manifest", gd_manifest, "manifest output path");
  add_shape_flags(gd, gd_sf);

  // split-data
  auto* sd = app.add_subcommand("split-data", "stratified ODD/PDD/TDD split");
  std::string sd_data, sd_odd = "odd.jsonl", sd_pdd = "pdd.jsonl", sd_tdd = "tdd.jsonl";
  double sd_fo = 0.6, sd_fp = 0.2, sd_ft = 0.2;
  sd->add_option("--data", sd_data, "full labeled manifest")->required();
  sd->add_option("--odd-frac", sd_fo, "ODD fraction");
  sd->add_option("--pdd-frac", sd_fp, "PDD fraction");
  sd->add_option("--tdd-frac", sd_ft, "TDD fraction");
  sd->add_option("--out-odd", sd_odd, "ODD manifest path");
  sd->add_option("--out-pdd", sd_pdd, "PDD manifest path");
  sd->add_option("--out-tdd", sd_tdd, "TDD manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!g.config_path.empty()) {
      std::ifstream is(g.config_path);
      if (!is) throw IoError("cannot open config: " + g.config_path);
      try {
        g.config = json::parse(is);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
      }
      if (app.count("--seed") == 0 && g.config.contains("seed"))
        g.seed = g.config["seed"].get<uint64_t>();
      if (app.count("--workers") == 0 && g.config.contains("workers"))
        g.workers = g.config["workers"].get<int>();
      if (app.count("--workdir") == 0 && g.config.contains("workdir"))
        g.workdir = g.config["workdir"].get<std::string>();
    }
    if (g.workers < 1) throw ValidationError("--workers must be >= 1");

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    write_run_sidecar(g, name);

    if (sub == tt) {
      merge_train_flags(tt, g, tt_tf);
      merge_cfg(tt, g, "arch", tt_arch);
      merge_cfg(tt, g, "out", tt_out);
      return run_train_target(g, tt_data, tt_arch, tt_out, tt_tf, tt_sf, tt_mean);
    }
    if (sub == so) return run_serve(g, so_ckpt, so_host, so_port, so_rate);
    if (sub == st) {
      merge_cfg(st, g, "budget", st_of.budget);
      merge_cfg(st, g, "price", st_of.price);
      return run_steal(g, st_of, st_pool, st_count, st_out);
    }
    if (sub == ba) return run_balance(g, ba_stolen, ba_classes, ba_target, ba_out, ba_report);
    if (sub == tc) {
      merge_train_flags(tc, g, tc_tf);
      merge_cfg(tc, g, "arch", tc_arch);
      return run_train_copycat(g, tc_fake, tc_arch, tc_out, tc_tf, tc_sf);
    }
    if (sub == ft) {
      merge_train_flags(ft, g, ft_tf);
      return run_finetune(g, ft_ckpt, ft_data, ft_out, ft_tf);
    }
    if (sub == ev)
      return run_eval(g, ev_ckpt, ev_tdd, ev_target_acc, ev_target_ckpt, ev_baseline_acc,
                      ev_baseline_ckpt, ev_stolen, ev_out, ev_confusion);
    if (sub == cu) {
      merge_train_flags(cu, g, cu_tf);
      merge_cfg(cu, g, "sizes", cu_sizes);
      merge_cfg(cu, g, "arch", cu_arch);
      merge_cfg(cu, g, "budget", cu_of.budget);
      merge_cfg(cu, g, "price", cu_of.price);
      return run_curve(g, cu_of, cu_pool, cu_sizes, cu_tdd, cu_target_acc, cu_baseline_acc,
                       cu_pdd, cu_run_dir, cu_arch, cu_tf, cu_sf, cu_ft_epochs, cu_ft_lr);
    }
    if (sub == ro) {
      merge_train_flags(ro, g, ro_tf);
      merge_cfg(ro, g, "arch", ro_arch);
      merge_cfg(ro, g, "count", ro_count);
      return run_robustness(g, ro_ckpts, ro_seeds, ro_pool, ro_count, ro_tdd, ro_arch, ro_tf,
                            ro_sf, ro_out);
    }
    if (sub == lr)
      return run_lrp(g, lr_ckpt, lr_target, lr_copycat, lr_image, lr_class, lr_truth,
                     lr_prefix);
    if (sub == fe) {
      merge_cfg(fe, g, "per-class", fe_per_class);
      merge_cfg(fe, g, "neighbors", fe_neighbors);
      merge_cfg(fe, g, "pool-size", fe_pool);
      return run_features(g, fe_ckpt, fe_odd, fe_npdd, fe_per_class, fe_neighbors, fe_pool,
                          fe_out, fe_pca);
    }
    if (sub == co) return run_cost(g, co_labeling, co_queries, co_price, co_odd, co_out,
                                   co_csv, co_problem);
    if (sub == gd) {
      if (gd_labeled && gd_unlabeled)
        throw ValidationError("--labeled and --unlabeled are mutually exclusive");
      const bool labeled = gd_labeled || (!gd_unlabeled && gd_domain == "digits");
      return run_gen_data(g, gd_domain, gd_per_class, gd_count, gd_dir, labeled, gd_classes,
                          gd_manifest, gd_sf);
    }
    if (sub == sd)
      return run_split_data(g, sd_data, sd_fo, sd_fp, sd_ft, sd_odd, sd_pdd, sd_tdd);
    throw ValidationError("unhandled subcommand: " + name);
  } catch (const std::exception& e) {
    emit(json{{"error", {{"type", error_kind(e)}, {"message", e.what()}}}});
    return 1;
  }
}
