#include "copycat/attack.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "copycat/rng.hpp"
#include "copycat/serialize.hpp"

namespace fs = std::filesystem;

namespace copycat {

void validate_plan(const AttackPlan& plan, int oracle_num_classes) {
  if (plan.run_dir.empty()) throw ValidationError("run_dir must be set");
  validate_manifest(plan.surrogate_pool);
  if (plan.surrogate_pool.split != Split::kNpdd)
    throw ValidationError("surrogate pool must be an NPDD manifest");
  if (plan.pdd_pool) {
    validate_manifest(*plan.pdd_pool);
    if (plan.pdd_pool->split != Split::kPdd)
      throw ValidationError("pdd_pool must be a PDD manifest");
    if (plan.pdd_pool->num_classes != plan.copycat_spec.num_classes)
      throw ValidationError("pdd_pool class count does not match the copycat");
  }
  if (plan.query_sizes.empty()) throw ValidationError("query_sizes must be nonempty");
  int64_t prev = 0;
  for (const int64_t s : plan.query_sizes) {
    if (s < 1) throw ValidationError("query sizes must be >= 1 (size 0 is implicit)");
    if (s <= prev) throw ValidationError("query_sizes must be strictly ascending");
    if (size_t(s) > plan.surrogate_pool.size())
      throw ValidationError("query size " + std::to_string(s) +
                            " exceeds the surrogate pool (" +
                            std::to_string(plan.surrogate_pool.size()) + ")");
    prev = s;
  }
  validate_spec(plan.copycat_spec);
  if (plan.copycat_spec.num_classes != oracle_num_classes)
    throw ValidationError("copycat class count does not match the oracle");
  validate_train_config(plan.train_config);
  // A zero-epoch fine-tune is the documented identity, so only nonzero
  // configs go through full validation.
  if (plan.finetune_config && plan.finetune_config->max_epochs > 0)
    validate_train_config(*plan.finetune_config);
}

std::vector<StolenLabelRecord> steal_labels(Oracle& oracle, const DatasetManifest& pool,
                                            int64_t count, uint64_t seed, int workers) {
  if (count < 0) throw ValidationError("count must be >= 0");
  if (count == 0) return {};
  validate_manifest(pool);
  if (pool.split == Split::kOdd || pool.split == Split::kTdd)
    throw ValidationError("stealing queries only run against NPDD or PDD pools");
  if (size_t(count) > pool.size())
    throw ValidationError("count " + std::to_string(count) + " exceeds the pool (" +
                          std::to_string(pool.size()) + ")");
  if (workers < 1) workers = 1;

  std::vector<size_t> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "steal"));
  rng.shuffle(order);
  order.resize(size_t(count));

  std::vector<StolenLabelRecord> out(static_cast<size_t>(count));
  const size_t nthreads = std::min<size_t>(size_t(workers), size_t(count));
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&](size_t t) {
    try {
      for (size_t i = t; i < size_t(count); i += nthreads) {
        const std::string& ref = pool.records[order[i]].ref;
        const HardLabel label = oracle.query_file(ref);
        out[i] = {ref, label.class_index, int64_t(i), oracle.oracle_id()};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (size_t t = 0; t < nthreads; ++t) threads.emplace_back(worker, t);
    for (auto& th : threads) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

DatasetManifest stolen_to_manifest(const std::vector<StolenLabelRecord>& stolen, Split split,
                                   int num_classes) {
  if (split == Split::kOdd || split == Split::kTdd)
    throw ValidationError("stolen labels only type as NPDD or PDD");
  DatasetManifest m;
  m.split = split;
  m.label_source = LabelSource::kSl;
  m.num_classes = num_classes;
  for (const auto& rec : stolen) m.records.push_back({rec.ref, rec.hard_label});
  validate_manifest(m);
  return m;
}

DatasetManifest build_fake_dataset(const std::vector<StolenLabelRecord>& stolen,
                                   int num_classes, int target_per_class, uint64_t seed,
                                   BalanceReport* report) {
  if (target_per_class <= 0) {
    std::map<int, int> counts;
    for (int c = 0; c < num_classes; ++c) counts[c] = 0;
    for (const auto& rec : stolen) ++counts[rec.hard_label];
    target_per_class = default_balance_target(counts);
  }
  auto [manifest, rep] = balance(stolen, num_classes, target_per_class, seed);
  if (report) *report = rep;
  return manifest;
}

Checkpoint train_copycat(const DatasetManifest& fake, const ModelSpec& spec,
                         const TrainConfig& cfg, TrainStats* stats) {
  validate_manifest(fake);
  if (fake.label_source != LabelSource::kSl)
    throw ValidationError("copycat training data must carry stolen labels");
  if (fake.num_classes != spec.num_classes)
    throw ValidationError("fake dataset class count does not match the copycat spec");
  if (cfg.subtract_mean)
    throw ValidationError("the oracle's preprocessing is unknown; subtract_mean must be false");
  const Checkpoint init = build_model(spec, cfg.seed);
  return train(init, fake, cfg, stats);
}

TrainConfig default_finetune_config(const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.learning_rate = base.learning_rate * 0.1;
  cfg.max_epochs = 2;
  cfg.lr_step_iters = 0;
  return cfg;
}

Checkpoint finetune(const Checkpoint& ckpt, const DatasetManifest& pdd_sl,
                    const TrainConfig& cfg, TrainStats* stats) {
  validate_manifest(pdd_sl);
  if (pdd_sl.label_source != LabelSource::kSl)
    throw ValidationError("fine-tuning data must carry stolen labels");
  if (pdd_sl.num_classes != ckpt.spec.num_classes)
    throw ValidationError("fine-tuning class count does not match the checkpoint");
  if (cfg.subtract_mean)
    throw ValidationError("the oracle's preprocessing is unknown; subtract_mean must be false");
  if (cfg.max_epochs == 0) return ckpt;
  return train(ckpt, pdd_sl, cfg, stats);
}

namespace {

nlohmann::json plan_to_json(const AttackPlan& plan, const Oracle& oracle) {
  nlohmann::json j;
  j["oracle_id"] = oracle.oracle_id();
  j["num_classes"] = oracle.num_classes();
  j["surrogate_pool_size"] = plan.surrogate_pool.size();
  j["pdd_pool_size"] = plan.pdd_pool ? nlohmann::json(plan.pdd_pool->size()) : nlohmann::json();
  j["query_sizes"] = plan.query_sizes;
  to_json(j["copycat_spec"], plan.copycat_spec);
  to_json(j["train_config"], plan.train_config);
  if (plan.finetune_config)
    to_json(j["finetune_config"], *plan.finetune_config);
  else
    j["finetune_config"] = nullptr;
  j["seed"] = plan.seed;
  return j;
}

void dump_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace

AttackRun run_data_curve(const AttackPlan& plan, Oracle& oracle, const EvalContext& eval,
                         int workers) {
  validate_plan(plan, oracle.num_classes());
  validate_manifest(eval.tdd);
  if (eval.tdd.split != Split::kTdd || eval.tdd.label_source != LabelSource::kOl)
    throw ValidationError("evaluation needs a TDD/OL manifest");
  if (eval.tdd.num_classes != plan.copycat_spec.num_classes)
    throw ValidationError("TDD class count does not match the copycat");
  if (eval.target_accuracy <= 0.0)
    throw ValidationError("target_accuracy must be positive");

  const int K = plan.copycat_spec.num_classes;
  fs::create_directories(plan.run_dir);
  fs::create_directories(fs::path(plan.run_dir) / "checkpoints");
  fs::create_directories(fs::path(plan.run_dir) / "reports");
  dump_json((fs::path(plan.run_dir) / "plan.json").string(), plan_to_json(plan, oracle));

  AttackRun run;
  const int64_t max_size = plan.query_sizes.back();
  run.stolen = steal_labels(oracle, plan.surrogate_pool, max_size,
                            derive_seed(plan.seed, "npdd"), workers);
  write_stolen((fs::path(plan.run_dir) / "stolen_labels.jsonl").string(), run.stolen);

  // PDD-SL for fine-tuning: every problem-domain image costs one query too.
  DatasetManifest pdd_balanced;
  const bool do_finetune = plan.pdd_pool.has_value();
  if (do_finetune) {
    const auto pdd_stolen = steal_labels(oracle, *plan.pdd_pool, int64_t(plan.pdd_pool->size()),
                                         derive_seed(plan.seed, "pdd"), workers);
    write_stolen((fs::path(plan.run_dir) / "pdd_stolen_labels.jsonl").string(), pdd_stolen);
    BalanceReport pdd_report;
    pdd_balanced = build_fake_dataset(pdd_stolen, K, 0, derive_seed(plan.seed, "pdd-balance"),
                                      &pdd_report);
    pdd_balanced.split = Split::kPdd;
    write_balance_report((fs::path(plan.run_dir) / "pdd_balance_report.json").string(),
                         pdd_report);
  }
  const TrainConfig ft_cfg = plan.finetune_config ? *plan.finetune_config
                                                  : default_finetune_config(plan.train_config);

  std::vector<int64_t> sizes{0};
  sizes.insert(sizes.end(), plan.query_sizes.begin(), plan.query_sizes.end());
  for (const int64_t s : sizes) {
    Checkpoint ckpt;
    if (s == 0) {
      ckpt = build_model(plan.copycat_spec, derive_seed(plan.seed, "copycat-0"));
    } else {
      const std::vector<StolenLabelRecord> prefix(run.stolen.begin(),
                                                  run.stolen.begin() + s);
      BalanceReport report;
      const DatasetManifest fake =
          build_fake_dataset(prefix, K, 0, derive_seed(plan.seed, "balance-" + std::to_string(s)),
                             &report);
      if (s == max_size)
        write_balance_report((fs::path(plan.run_dir) / "balance_report.json").string(), report);
      TrainConfig cfg = plan.train_config;
      cfg.seed = derive_seed(plan.seed, "copycat-" + std::to_string(s));
      ckpt = train_copycat(fake, plan.copycat_spec, cfg);
    }
    const std::string ckpt_path =
        (fs::path(plan.run_dir) / "checkpoints" / (std::to_string(s) + ".ckpt")).string();
    save_checkpoint(ckpt_path, ckpt);
    run.checkpoint_paths[s] = ckpt_path;

    std::vector<int> stolen_prefix_labels;
    for (int64_t i = 0; i < s; ++i) stolen_prefix_labels.push_back(run.stolen[i].hard_label);
    auto [preds, truths] = predict_manifest(ckpt, eval.tdd);
    CopyReport report = make_copy_report(eval.target_accuracy, eval.baseline_accuracy, preds,
                                         truths, K, stolen_prefix_labels);
    write_copy_report(
        (fs::path(plan.run_dir) / "reports" / (std::to_string(s) + ".json")).string(), report);
    run.reports[s] = report;

    CurvePoint point;
    point.query_count = s;
    point.perf_over_target = report.perf_over_target;

    if (do_finetune) {
      TrainConfig cfg = ft_cfg;
      cfg.seed = derive_seed(plan.seed, "finetune-" + std::to_string(s));
      const Checkpoint tuned = finetune(ckpt, pdd_balanced, cfg);
      const std::string tuned_path =
          (fs::path(plan.run_dir) / "checkpoints" / (std::to_string(s) + ".finetuned.ckpt"))
              .string();
      save_checkpoint(tuned_path, tuned);
      run.finetuned_paths[s] = tuned_path;
      auto [ft_preds, ft_truths] = predict_manifest(tuned, eval.tdd);
      CopyReport ft_report = make_copy_report(eval.target_accuracy, eval.baseline_accuracy,
                                              ft_preds, ft_truths, K, stolen_prefix_labels);
      write_copy_report(
          (fs::path(plan.run_dir) / "reports" / (std::to_string(s) + ".finetuned.json"))
              .string(),
          ft_report);
      run.finetuned_reports[s] = ft_report;
      point.finetuned_perf = ft_report.perf_over_target;
    }
    run.curve.push_back(point);
  }

  write_curve_csv((fs::path(plan.run_dir) / "curve.csv").string(), run.curve);
  write_curve_svg((fs::path(plan.run_dir) / "curve.svg").string(), run.curve);
  return run;
}

}  // namespace copycat
