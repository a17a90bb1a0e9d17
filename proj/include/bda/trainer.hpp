#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bda/checkpoint.hpp"
#include "bda/dataset.hpp"
#include "bda/losses.hpp"
#include "bda/metrics.hpp"
#include "bda/model.hpp"
#include "bda/optim.hpp"

namespace bda {

struct TrainConfig {
  std::size_t iterations = 500;
  std::size_t batch_size = 8;
  double lr = 1e-4;
  double weight_decay = 5e-3;
  std::size_t crop = 256;
  // 0 disables validation; the final weights are then returned.
  std::size_t eval_every = 0;
  // Loss record cadence in the log; 0 logs only validation steps.
  std::size_t log_every = 10;
  std::uint64_t seed = 0;
  bool augment = true;

  // Training recipe used for the full-size xBD runs: 50000 iterations,
  // batch 8, lr 1e-4, weight decay 5e-3, 256 x 256 crops.
  static TrainConfig full_preset();
  // Desk-scale defaults for 32 x 32 fixtures.
  static TrainConfig toy_preset();

  void validate() const;
};

struct StepLosses {
  double total = 0.0;
  double loc_ce = 0.0, loc_lovasz = 0.0;
  double dmg_ce = 0.0, dmg_focal = 0.0, dmg_lovasz = 0.0;
};

struct LogRecord {
  std::size_t iteration = 0;
  StepLosses losses;
  std::optional<ScoreReport> validation;
};

struct TrainLog {
  std::vector<LogRecord> records;
  // One JSON object per line.
  std::string to_jsonl() const;
};

struct Batch {
  Tensor pre, post;  // N x 3 x H x W
  std::vector<Mask> loc, dmg;
  std::vector<std::string> ids;
};

// Stacks samples of identical size into a batch.
Batch make_batch(std::span<const Sample> samples);

// Damage-head objective; the default is losses::damage_head_loss with the
// model's focal settings and FOCAL-aware weights.
using DamageLossFn = std::function<losses::HeadLoss(
    const Var& logits, std::span<const Mask> dmg, const ModelConfig& cfg)>;

struct LossOutput {
  Var total;
  StepLosses terms;
};

LossOutput training_loss(const Model& model, const Batch& batch,
                         const DamageLossFn& damage_loss = {});

struct TrainOptions {
  // Config echo stored in the checkpoint; defaults to the model/train keys.
  std::string config_text;
  std::string dataset_name;
  DamageLossFn damage_loss;
  // Called after each optimizer step.
  std::function<void(std::size_t iteration, const StepLosses&)> on_step;
};

struct TrainResult {
  CheckpointData best;
  std::size_t best_iteration = 0;
  std::optional<ScoreReport> best_report;
  TrainLog log;
};

// Seeded loop: sample batch -> augment -> forward -> building + damage head
// losses -> backward -> AdamW. Validates every eval_every steps (and after
// the last step) and keeps the weights with the highest f1_oa. Throws
// NumericError naming the batch ids if a loss goes non-finite.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::span<const Sample> train_set, std::span<const Sample> valid_set,
                  const TrainOptions& opts = {});

struct Prediction {
  Mask loc;
  Mask dmg;
  ForwardResult forward;
};

// Argmax prediction for one sample. Sizes not divisible by 16 are reflect-
// padded up to the next multiple and the prediction is cropped back.
Prediction predict(const Model& model, const Sample& s);

ConfusionMatrix evaluate_confusion(const Model& model, std::span<const Sample> samples);
ScoreReport evaluate(const Model& model, std::span<const Sample> samples,
                     const std::string& dataset_name = "");

// Builds the model described by a checkpoint's config echo and loads its
// weights.
Model model_from_checkpoint(const CheckpointData& ck);

// Short runs on a small network: long enough for FOCAL to pick up the
// minority class, short enough that Baseline usually has not yet.
struct ImbalanceSettings {
  std::size_t train_images = 12;
  std::size_t test_images = 24;
  std::size_t size = 32;
  TrainConfig train = imbalance_train_config();
  ModelConfig model = imbalance_model_config();

  static TrainConfig imbalance_train_config();
  static ModelConfig imbalance_model_config();
};

struct ImbalanceRow {
  std::uint64_t seed = 0;
  double baseline_minority_f1 = 0.0;
  double focal_minority_f1 = 0.0;
};

struct ImbalanceSummary {
  std::vector<ImbalanceRow> rows;
  std::size_t focal_at_least_baseline = 0;
};

// For each seed: builds a 20:1 L1/L3 fixture, trains Baseline and FOCAL with
// everything else identical, and scores the minority class (L3) F1 on a
// held-out fixture from the same generator.
ImbalanceSummary imbalance_experiment(std::span<const std::uint64_t> seeds,
                                      const ImbalanceSettings& settings = {});

struct EvalSet {
  std::string name;
  std::span<const Sample> samples;
};

struct SweepSettings {
  ModelConfig base;  // widths and loss settings; enhancement flags are overridden
  TrainConfig train;
  std::vector<std::string> variants = standard_variants();
  std::string train_name;
};

struct SweepResult {
  // One report per (variant, eval set), variants in the given order.
  std::vector<ScoreReport> reports;
  std::vector<CheckpointData> checkpoints;  // one per variant

  std::string to_csv() const;
};

// Trains every variant on train_set (validating on valid_set) and scores the
// selected checkpoint on each evaluation set. In-domain and cross-dataset
// cells differ only in the evaluation set.
SweepResult run_sweep(std::span<const Sample> train_set, std::span<const Sample> valid_set,
                      std::span<const EvalSet> eval_sets, const SweepSettings& settings,
                      const std::function<void(const ScoreReport&)>& on_report = {});

}  // namespace bda
