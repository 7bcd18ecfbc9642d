#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drs/augment.hpp"
#include "drs/corpus.hpp"
#include "drs/model.hpp"

namespace drs {

/// Hyper-parameters shared by pre-training and fine-tuning runs.
struct TrainConfig {
  std::string task_mix = "mlm+nsp";  // "mlm+nsp", "mlm", or "nsp"
  double mlm_weight = 1.0;
  double learning_rate = 1e-5;
  std::vector<double> lr_grid = {1e-5, 5e-5, 1e-4};
  int batch_size = 256;
  int epochs = 1;
  int warmup_steps = 500;
  double grad_clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1234;
  bool resample_negatives_per_epoch = false;
  std::vector<int> checkpoint_epochs = {5, 10, 25, 50};
  int max_len = 256;
  double mlm_mask_prob = 0.15;
  std::string checkpoint_dir;  // empty: no checkpoint files written

  bool nsp_enabled() const { return task_mix == "mlm+nsp" || task_mix == "nsp"; }
  bool mlm_enabled() const { return task_mix == "mlm+nsp" || task_mix == "mlm"; }

  /// Throws ConfigError on an unknown task mix or out-of-range numbers.
  /// learning_rate 0 is allowed (a no-op run is a useful diagnostic).
  void validate() const;
};

/// Warmup-linear schedule: ramps 0 -> base over [0, warmup], then decays
/// base -> 0 over [warmup, total_steps]. Preconditions: 0 <= step <=
/// total_steps and 0 <= warmup < total_steps; violations throw ConfigError.
double lr_at(std::int64_t step, double base_lr, std::int64_t warmup,
             std::int64_t total_steps);

/// Per-optimizer-step telemetry passed to an observer. `grad_norm` is the
/// global gradient norm before clipping, `clipped_norm` the recomputed norm
/// of what the optimizer actually consumed.
struct StepEvent {
  std::int64_t step = 0;  // 1-based across the whole run
  int epoch = 0;          // 1-based
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_nsp = 0.0;
  double loss_mlm = 0.0;
  double grad_norm = 0.0;
  double clipped_norm = 0.0;
  std::int64_t masked_positions = 0;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_total_loss = 0.0;
  double mean_nsp_loss = 0.0;
  double mean_mlm_loss = 0.0;
  std::int64_t steps = 0;
  double wall_clock_seconds = 0.0;
  std::optional<double> valid_r_at_1;
  std::optional<std::string> checkpoint_path;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::int64_t total_steps = 0;
};

/// One JSON object per epoch, newline-terminated. Optional fields are
/// omitted when absent. Wall-clock readings vary run to run; all other
/// fields are deterministic.
std::string to_jsonl(const TrainReport& report);

/// Task-adaptive pre-training over an augmented pair set. Encodes every
/// pair up front, reshuffles each epoch from (seed, epoch), applies fresh
/// masking per (seed, epoch, instance) when the mix includes MLM, and saves
/// checkpoints at the configured epochs (plus the final epoch) when
/// checkpoint_dir is set. When `valid` is non-null, held-out R@1 is
/// recorded every epoch. Throws TrainError when an NSP mix sees no
/// negatives or when the loss turns non-finite (naming the step).
TrainReport pretrain(Model& model, const Vocabulary& vocab, const TapSet& data,
                     const TrainConfig& cfg,
                     const std::vector<CandidateGroup>* valid = nullptr,
                     const StepObserver& observer = {});

/// Fine-tuning on original (unaugmented) labeled pairs. The task mix is
/// forced to NSP; everything else follows the pretrain contract. The input
/// model keeps all its weights, heads included, as the starting point.
TrainReport finetune(Model& model, const Vocabulary& vocab,
                     const std::vector<Dialogue>& train_pairs, TrainConfig cfg,
                     const std::vector<CandidateGroup>* valid = nullptr,
                     const StepObserver& observer = {});

struct GridEntry {
  double lr = 0.0;
  double score = 0.0;  // validation R@1; meaningless when failed
  bool failed = false;
  std::string error;
};

struct GridResult {
  double best_lr = 0.0;
  double best_score = 0.0;
  std::vector<GridEntry> entries;  // grid order
};

/// Run `train_and_score` (returning validation R@1) once per learning rate
/// and pick the argmax; exact ties go to the smaller rate. A run that
/// throws is recorded as failed and excluded. All runs failing is a
/// TrainError; an empty grid is a ConfigError.
GridResult grid_search(const std::vector<double>& lr_grid,
                       const std::function<double(double)>& train_and_score);

}  // namespace drs
