#include "drs/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "drs/encode.hpp"
#include "drs/errors.hpp"
#include "drs/eval.hpp"
#include "drs/rng.hpp"

namespace drs {
namespace {

/// Adam with bias correction over flat parameter/gradient buffers.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double beta1, double beta2, double epsilon)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + epsilon_);
    }
  }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

double global_norm(const std::vector<double>& values) {
  double sum = 0.0;
  for (const double v : values) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

/// Hands the trainer this epoch's instances; lets pre-training swap in
/// freshly sampled negatives per epoch while fine-tuning reuses one set.
using EpochInstances = std::function<const std::vector<EncodedInstance>&(int epoch)>;

TrainReport run_training(Model& model, const Vocabulary& vocab, const TrainConfig& cfg,
                         const EpochInstances& instances_for_epoch,
                         const std::vector<CandidateGroup>* valid,
                         const StepObserver& observer) {
  cfg.validate();
  model.bind_vocab(vocab);

  const std::int64_t count =
      static_cast<std::int64_t>(instances_for_epoch(1).size());
  if (count == 0) {
    throw DataError("no training instances");
  }
  const std::int64_t steps_per_epoch = (count + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  if (cfg.warmup_steps >= total_steps) {
    throw ConfigError("warmup_steps (" + std::to_string(cfg.warmup_steps) +
                      ") must be smaller than the total optimizer steps (" +
                      std::to_string(total_steps) + ")");
  }

  AdamOptimizer adam(model.params().flat().size(), cfg.adam_beta1, cfg.adam_beta2,
                     cfg.adam_epsilon);
  ParamStore grads(model.config());
  TrainReport report;
  std::int64_t global_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const std::vector<EncodedInstance>& instances = instances_for_epoch(epoch);
    if (static_cast<std::int64_t>(instances.size()) != count) {
      throw TrainError("instance count changed between epochs");
    }

    std::vector<std::int64_t> perm(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng = Rng::from_path(cfg.seed, StreamTag::kEpochShuffle,
                                     {static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(perm);

    double sum_total = 0.0;
    double sum_nsp = 0.0;
    double sum_mlm = 0.0;
    std::int64_t epoch_steps = 0;

    for (std::int64_t start = 0; start < count; start += cfg.batch_size) {
      const std::int64_t end = std::min(count, start + cfg.batch_size);
      std::vector<EncodedInstance> slice;
      slice.reserve(static_cast<std::size_t>(end - start));
      for (std::int64_t i = start; i < end; ++i) {
        const std::int64_t original = perm[static_cast<std::size_t>(i)];
        const EncodedInstance& base = instances[static_cast<std::size_t>(original)];
        if (cfg.mlm_enabled()) {
          const std::uint64_t mask_seed =
              Rng::from_path(cfg.seed, StreamTag::kMasking,
                             {static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(original)})
                  .next_u64();
          slice.push_back(apply_mlm_mask(base, cfg.mlm_mask_prob, mask_seed, vocab));
        } else {
          slice.push_back(base);
        }
      }
      const Batch batch = Batch::from_instances(slice);

      ++global_step;
      ++epoch_steps;
      grads.fill_zero();
      LossOptions opts;
      opts.nsp_task = cfg.nsp_enabled();
      opts.mlm_task = cfg.mlm_enabled();
      opts.mlm_weight = cfg.mlm_weight;
      opts.training = true;
      opts.dropout_seed = Rng::from_path(cfg.seed, StreamTag::kDropout,
                                         {static_cast<std::uint64_t>(global_step)})
                              .next_u64();
      const LossBreakdown loss = model.loss(batch, opts, &grads);
      if (!std::isfinite(loss.total)) {
        throw TrainError("non-finite loss at step " + std::to_string(global_step));
      }

      const double norm = global_norm(grads.flat());
      if (norm > cfg.grad_clip_norm) {
        const double scale = cfg.grad_clip_norm / norm;
        for (double& g : grads.flat()) {
          g *= scale;
        }
      }
      const double lr = lr_at(global_step, cfg.learning_rate, cfg.warmup_steps,
                              total_steps);
      adam.step(model.params().flat(), grads.flat(), lr);

      sum_total += loss.total;
      sum_nsp += loss.nsp;
      sum_mlm += loss.mlm;
      if (observer) {
        StepEvent event;
        event.step = global_step;
        event.epoch = epoch;
        event.lr = lr;
        event.loss_total = loss.total;
        event.loss_nsp = loss.nsp;
        event.loss_mlm = loss.mlm;
        event.grad_norm = norm;
        event.clipped_norm = global_norm(grads.flat());
        event.masked_positions = loss.masked_positions;
        observer(event);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.steps = epoch_steps;
    record.mean_total_loss = sum_total / static_cast<double>(epoch_steps);
    record.mean_nsp_loss = sum_nsp / static_cast<double>(epoch_steps);
    record.mean_mlm_loss = sum_mlm / static_cast<double>(epoch_steps);
    if (valid != nullptr) {
      record.valid_r_at_1 = evaluate(model, *valid, vocab, cfg.max_len).r_at_1;
    }

    model.provenance().task_mix = cfg.task_mix;
    model.provenance().epochs = epoch;
    model.provenance().seed = cfg.seed;
    const bool scheduled =
        std::find(cfg.checkpoint_epochs.begin(), cfg.checkpoint_epochs.end(), epoch) !=
        cfg.checkpoint_epochs.end();
    if (!cfg.checkpoint_dir.empty() && (scheduled || epoch == cfg.epochs)) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      const std::string path =
          (std::filesystem::path(cfg.checkpoint_dir) /
           ("epoch-" + std::to_string(epoch) + ".ckpt"))
              .string();
      save_checkpoint(model, vocab, path);
      record.checkpoint_path = path;
    }

    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
            .count();
    report.epochs.push_back(std::move(record));
  }

  report.total_steps = global_step;
  return report;
}

std::vector<EncodedInstance> encode_pairs(const std::vector<ContextResponsePair>& pairs,
                                          const Vocabulary& vocab, int max_len) {
  std::vector<EncodedInstance> out;
  out.reserve(pairs.size());
  for (const ContextResponsePair& pair : pairs) {
    out.push_back(encode_pair(pair.context, pair.response, vocab, max_len, pair.label));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (task_mix != "mlm+nsp" && task_mix != "mlm" && task_mix != "nsp") {
    throw ConfigError("task_mix must be one of mlm+nsp, mlm, nsp; got '" + task_mix +
                      "'");
  }
  if (learning_rate < 0.0) {
    throw ConfigError("learning_rate must be non-negative");
  }
  if (mlm_weight < 0.0) {
    throw ConfigError("mlm_weight must be non-negative");
  }
  if (batch_size < 1) {
    throw ConfigError("batch_size must be at least 1");
  }
  if (epochs < 1) {
    throw ConfigError("epochs must be at least 1");
  }
  if (warmup_steps < 0) {
    throw ConfigError("warmup_steps must be non-negative");
  }
  if (grad_clip_norm <= 0.0) {
    throw ConfigError("grad_clip_norm must be positive");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (adam_epsilon <= 0.0) {
    throw ConfigError("adam_epsilon must be positive");
  }
  if (max_len < 8) {
    throw ConfigError("max_len must be at least 8");
  }
  if (mlm_mask_prob < 0.0 || mlm_mask_prob > 1.0) {
    throw ConfigError("mlm_mask_prob must lie in [0, 1]");
  }
  for (const int epoch : checkpoint_epochs) {
    if (epoch < 1) {
      throw ConfigError("checkpoint_epochs entries must be at least 1");
    }
  }
}

double lr_at(std::int64_t step, double base_lr, std::int64_t warmup,
             std::int64_t total_steps) {
  if (total_steps <= 0) {
    throw ConfigError("total_steps must be positive");
  }
  if (warmup < 0 || warmup >= total_steps) {
    throw ConfigError("warmup must lie in [0, total_steps)");
  }
  if (step < 0 || step > total_steps) {
    throw ConfigError("step must lie in [0, total_steps]");
  }
  if (base_lr < 0.0) {
    throw ConfigError("base_lr must be non-negative");
  }
  if (warmup > 0 && step <= warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

std::string to_jsonl(const TrainReport& report) {
  std::string out;
  for (const EpochRecord& record : report.epochs) {
    nlohmann::json line{{"epoch", record.epoch},
                        {"mean_total_loss", record.mean_total_loss},
                        {"mean_nsp_loss", record.mean_nsp_loss},
                        {"mean_mlm_loss", record.mean_mlm_loss},
                        {"steps", record.steps},
                        {"wall_clock_seconds", record.wall_clock_seconds}};
    if (record.valid_r_at_1.has_value()) {
      line["valid_r_at_1"] = *record.valid_r_at_1;
    }
    if (record.checkpoint_path.has_value()) {
      line["checkpoint"] = *record.checkpoint_path;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

TrainReport pretrain(Model& model, const Vocabulary& vocab, const TapSet& data,
                     const TrainConfig& cfg, const std::vector<CandidateGroup>* valid,
                     const StepObserver& observer) {
  cfg.validate();
  std::int64_t positive_count = 0;
  for (const ContextResponsePair& pair : data.pairs) {
    positive_count += pair.label == 1 ? 1 : 0;
  }
  if (cfg.nsp_enabled() && positive_count == static_cast<std::int64_t>(data.pairs.size())) {
    throw TrainError(
        "the match task needs negative examples, but every pre-training pair "
        "is labeled 1; raise the negative ratio");
  }

  std::vector<EncodedInstance> instances;
  int cached_epoch = 0;
  std::vector<ContextResponsePair> positives;
  int ratio = 0;
  if (cfg.resample_negatives_per_epoch) {
    for (const ContextResponsePair& pair : data.pairs) {
      if (pair.label == 1) {
        positives.push_back(pair);
      }
    }
    const std::int64_t negative_count =
        static_cast<std::int64_t>(data.pairs.size()) - positive_count;
    if (positive_count == 0 || negative_count % positive_count != 0) {
      throw ConfigError(
          "per-epoch negative resampling requires an integral negative:positive "
          "ratio in the input set");
    }
    ratio = static_cast<int>(negative_count / positive_count);
  }

  const EpochInstances provider = [&](int epoch) -> const std::vector<EncodedInstance>& {
    if (epoch == cached_epoch) {
      return instances;
    }
    if (epoch == 1 || !cfg.resample_negatives_per_epoch || ratio == 0) {
      if (cached_epoch == 0) {
        instances = encode_pairs(data.pairs, vocab, cfg.max_len);
      }
    } else {
      const std::uint64_t epoch_seed =
          Rng::from_path(cfg.seed, StreamTag::kNegativeSampling,
                         {static_cast<std::uint64_t>(epoch)})
              .next_u64();
      std::vector<ContextResponsePair> pairs = positives;
      const std::vector<ContextResponsePair> negatives =
          sample_negatives(positives, data.response_pool, ratio, epoch_seed);
      pairs.insert(pairs.end(), negatives.begin(), negatives.end());
      instances = encode_pairs(pairs, vocab, cfg.max_len);
    }
    cached_epoch = epoch;
    return instances;
  };

  return run_training(model, vocab, cfg, provider, valid, observer);
}

TrainReport finetune(Model& model, const Vocabulary& vocab,
                     const std::vector<Dialogue>& train_pairs, TrainConfig cfg,
                     const std::vector<CandidateGroup>* valid,
                     const StepObserver& observer) {
  cfg.task_mix = "nsp";
  cfg.validate();
  bool has_negative = false;
  for (const Dialogue& d : train_pairs) {
    if (d.label == 0) {
      has_negative = true;
      break;
    }
  }
  if (!train_pairs.empty() && !has_negative) {
    throw TrainError(
        "the match task needs negative examples, but every fine-tuning pair is "
        "labeled 1");
  }

  std::vector<EncodedInstance> instances;
  instances.reserve(train_pairs.size());
  for (const Dialogue& d : train_pairs) {
    instances.push_back(encode_pair(d.turns, d.response, vocab, cfg.max_len, d.label));
  }
  const EpochInstances provider = [&](int) -> const std::vector<EncodedInstance>& {
    return instances;
  };
  return run_training(model, vocab, cfg, provider, valid, observer);
}

GridResult grid_search(const std::vector<double>& lr_grid,
                       const std::function<double(double)>& train_and_score) {
  if (lr_grid.empty()) {
    throw ConfigError("learning-rate grid is empty");
  }
  GridResult result;
  bool any = false;
  for (const double lr : lr_grid) {
    GridEntry entry;
    entry.lr = lr;
    try {
      entry.score = train_and_score(lr);
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.error = e.what();
      result.entries.push_back(std::move(entry));
      continue;
    }
    if (!any || entry.score > result.best_score ||
        (entry.score == result.best_score && lr < result.best_lr)) {
      result.best_lr = lr;
      result.best_score = entry.score;
      any = true;
    }
    result.entries.push_back(std::move(entry));
  }
  if (!any) {
    throw TrainError("every learning rate in the grid failed");
  }
  return result;
}

}  // namespace drs
