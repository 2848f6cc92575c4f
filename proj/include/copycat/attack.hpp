#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copycat/evaluation.hpp"
#include "copycat/manifest.hpp"
#include "copycat/model.hpp"
#include "copycat/oracle.hpp"

namespace copycat {

// Everything the attacker controls. The surrogate pool is unlabeled
// disjoint-domain data (NPDD/NONE); pdd_pool, when present, holds
// problem-domain images whose labels will also be bought from the oracle.
// Nothing in this module ever touches an ODD manifest.
struct AttackPlan {
  std::string run_dir;
  DatasetManifest surrogate_pool;
  std::optional<DatasetManifest> pdd_pool;
  std::vector<int64_t> query_sizes;  // strictly ascending, each >= 1 and <= pool size
  ModelSpec copycat_spec;
  TrainConfig train_config;
  std::optional<TrainConfig> finetune_config;  // defaulted when absent and pdd_pool given
  uint64_t seed = 1;
};

void validate_plan(const AttackPlan& plan, int oracle_num_classes);

// Experimenter-side inputs for scoring a run; the attack itself never reads
// them. target_accuracy is the target's macro accuracy on the same TDD.
struct EvalContext {
  DatasetManifest tdd;
  double target_accuracy = 0.0;
  std::optional<double> baseline_accuracy;
};

// Draws `count` images from the pool without replacement in seeded-shuffled
// order and buys one hard label each. Budget is consumed by exactly `count`
// on success; count = 0 never touches the oracle. ODD/TDD pools are refused.
// Queries are dispatched over `workers` threads; records come back in draw
// order regardless of completion order.
std::vector<StolenLabelRecord> steal_labels(Oracle& oracle, const DatasetManifest& pool,
                                            int64_t count, uint64_t seed, int workers = 1);

// The stolen records as a labeled manifest (split preserved from the pool).
DatasetManifest stolen_to_manifest(const std::vector<StolenLabelRecord>& stolen, Split split,
                                   int num_classes);

// Balanced NPDD-SL manifest from stolen records. target_per_class <= 0 picks
// the lower median of the per-class counts.
DatasetManifest build_fake_dataset(const std::vector<StolenLabelRecord>& stolen,
                                   int num_classes, int target_per_class, uint64_t seed,
                                   BalanceReport* report = nullptr);

// Fresh model trained on the fake dataset only. The oracle's preprocessing is
// unknown to the attacker, so cfg.subtract_mean must be false.
Checkpoint train_copycat(const DatasetManifest& fake, const ModelSpec& spec,
                         const TrainConfig& cfg, TrainStats* stats = nullptr);

// Restarts the schedule at a tenth of the base rate for two epochs.
TrainConfig default_finetune_config(const TrainConfig& base);

// Continues training from ckpt on PDD-SL data; 0 epochs returns the
// parameters unchanged.
Checkpoint finetune(const Checkpoint& ckpt, const DatasetManifest& pdd_sl,
                    const TrainConfig& cfg, TrainStats* stats = nullptr);

struct AttackRun {
  std::vector<StolenLabelRecord> stolen;
  std::map<int64_t, CopyReport> reports;
  std::map<int64_t, CopyReport> finetuned_reports;
  std::map<int64_t, std::string> checkpoint_paths;
  std::map<int64_t, std::string> finetuned_paths;
  std::vector<CurvePoint> curve;
};

// Steals max(query_sizes) labels once, then for each size s trains a copycat
// on the first s records (balanced) and evaluates it on eval.tdd; size 0 (the
// untrained model) is always included. With pdd_pool present every copycat is
// also fine-tuned on oracle-labeled PDD and re-evaluated. Writes into
// plan.run_dir: plan.json, stolen_labels.jsonl, balance_report.json (largest
// size), pdd_stolen_labels.jsonl + pdd_balance_report.json when fine-tuning,
// checkpoints/<size>[.finetuned].ckpt, reports/<size>[.finetuned].json,
// curve.csv, curve.svg.
AttackRun run_data_curve(const AttackPlan& plan, Oracle& oracle, const EvalContext& eval,
                         int workers = 1);

}  // namespace copycat
