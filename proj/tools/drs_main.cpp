// Command-line surface for the response-selection toolkit: corpus statistics,
// pre-training data augmentation, pre-training, fine-tuning, ranking
// evaluation, n-gram overlap analysis, and synthetic corpus generation.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 training abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drs/analysis.hpp"
#include "drs/augment.hpp"
#include "drs/corpus.hpp"
#include "drs/encode.hpp"
#include "drs/errors.hpp"
#include "drs/eval.hpp"
#include "drs/model.hpp"
#include "drs/synth.hpp"
#include "drs/train.hpp"
#include "drs/version.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Provenance plumbing: every artifact embeds the resolved configuration that
// produced it, either inline (JSON payloads) or as a sidecar .meta.json (for
// formats that cannot carry extra fields, like TSV).

json resolved_config(const CLI::App& cmd) {
  json config = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") {
      continue;
    }
    std::string value;
    if (opt->count() > 0) {
      const std::vector<std::string>& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (i > 0) {
          value += ',';
        }
        value += results[i];
      }
      if (results.empty()) {
        value = "true";
      }
    } else {
      value = opt->get_default_str();
      if (value.empty() && opt->get_expected_min() == 0) {
        value = "false";
      }
    }
    config[name] = value;
  }
  return config;
}

json provenance_block(const CLI::App& cmd) {
  return json{{"toolkit_version", drs::kVersion},
              {"command", cmd.get_name()},
              {"config", resolved_config(cmd)}};
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw drs::ConfigError("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw drs::ConfigError("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, target);
}

void write_sidecar_meta(const std::string& artifact_path, const CLI::App& cmd) {
  write_file_atomic(artifact_path + ".meta.json", provenance_block(cmd).dump(2) + "\n");
}

/// JSON payloads get the provenance embedded and land on stdout or --output.
void emit_json(const json& payload, const CLI::App& cmd, const std::string& output_path) {
  json body = payload;
  body["provenance"] = provenance_block(cmd);
  const std::string text = body.dump(2) + "\n";
  if (output_path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(output_path, text);
  }
}

// ---------------------------------------------------------------------------
// Shared option bundles.

struct ModelFlags {
  int layers = 2;
  int heads = 2;
  int hidden = 32;
  int ffn_multiplier = 4;
  double dropout = 0.0;
  bool untie_mlm_decoder = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--layers", layers, "Encoder layers")->capture_default_str();
    cmd.add_option("--heads", heads, "Attention heads")->capture_default_str();
    cmd.add_option("--hidden", hidden, "Hidden size")->capture_default_str();
    cmd.add_option("--ffn-multiplier", ffn_multiplier, "Feed-forward width multiplier")
        ->capture_default_str();
    cmd.add_option("--dropout", dropout, "Dropout probability")->capture_default_str();
    cmd.add_flag("--untie-mlm-decoder", untie_mlm_decoder,
                 "Give the token-reconstruction decoder its own weights instead of "
                 "sharing the word embeddings");
  }
};

struct TrainFlags {
  drs::TrainConfig cfg;

  void attach(CLI::App& cmd, bool pretraining) {
    if (pretraining) {
      cmd.add_option("--task-mix", cfg.task_mix, "mlm+nsp, mlm, or nsp")
          ->capture_default_str();
      cmd.add_option("--mlm-weight", cfg.mlm_weight,
                     "Weight of the reconstruction term in the loss")
          ->capture_default_str();
      cmd.add_option("--mlm-mask-prob", cfg.mlm_mask_prob,
                     "Per-token masking probability")
          ->capture_default_str();
      cmd.add_flag("--resample-negatives", cfg.resample_negatives_per_epoch,
                   "Draw fresh negatives every epoch instead of fixing them");
      cmd.add_option("--checkpoint-epochs", cfg.checkpoint_epochs,
                     "Epochs at which to write checkpoints")
          ->delimiter(',')
          ->capture_default_str();
    } else {
      cfg.epochs = 1;
      cfg.warmup_steps = 10;
    }
    cmd.add_option("--lr", cfg.learning_rate, "Base learning rate")->capture_default_str();
    cmd.add_option("--batch-size", cfg.batch_size, "Instances per optimizer step")
        ->capture_default_str();
    cmd.add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    cmd.add_option("--warmup", cfg.warmup_steps, "Warmup steps of the lr schedule")
        ->capture_default_str();
    cmd.add_option("--clip", cfg.grad_clip_norm, "Global gradient-norm clip")
        ->capture_default_str();
    cmd.add_option("--beta1", cfg.adam_beta1, "Adam beta1")->capture_default_str();
    cmd.add_option("--beta2", cfg.adam_beta2, "Adam beta2")->capture_default_str();
    cmd.add_option("--seed", cfg.seed, "Seed for every random choice in the run")
        ->capture_default_str();
    cmd.add_option("--max-len", cfg.max_len, "Maximum encoded sequence length")
        ->capture_default_str();
  }
};

drs::TokenizerOptions tokenizer_from(bool no_lowercase) {
  drs::TokenizerOptions opts;
  opts.lowercase = !no_lowercase;
  return opts;
}

std::vector<drs::CandidateGroup> load_groups(const std::string& path, int group_size,
                                             bool lenient) {
  const drs::ParseResult parsed = drs::parse_tsv_file(path, !lenient);
  return drs::group_candidates(parsed.dialogues, group_size);
}

void dump_first_encoded(const std::vector<drs::Dialogue>& rows,
                        const drs::Vocabulary& vocab, int max_len, int count) {
  for (int i = 0; i < count && i < static_cast<int>(rows.size()); ++i) {
    const drs::Dialogue& d = rows[static_cast<std::size_t>(i)];
    const drs::EncodedInstance inst =
        drs::encode_pair(d.turns, d.response, vocab, max_len, d.label);
    std::cerr << drs::to_json_string(inst) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns nothing and throws drs errors on failure.

struct StatsArgs {
  std::string input;
  std::string output;
  bool lenient = false;
  bool no_lowercase = false;
};

void run_stats(const StatsArgs& args, const CLI::App& cmd) {
  const drs::ParseResult parsed = drs::parse_tsv_file(args.input, !args.lenient);
  const drs::CorpusStats stats = drs::compute_stats(parsed.dialogues);
  json payload = json::parse(drs::to_json_string(stats));
  payload["skipped_lines"] = parsed.skipped_lines;
  emit_json(payload, cmd, args.output);
}

struct AugmentArgs {
  std::string input;
  std::string output;
  int ratio = 1;
  std::uint64_t seed = 1234;
  bool lenient = false;
};

void run_augment(const AugmentArgs& args, const CLI::App& cmd) {
  const drs::ParseResult parsed = drs::parse_tsv_file(args.input, !args.lenient);
  const drs::TapSet tap = drs::build_tap_set(parsed.dialogues, args.ratio, args.seed);
  write_file_atomic(args.output, drs::serialize_tap_tsv(tap.pairs));
  write_sidecar_meta(args.output, cmd);
}

struct SynthArgs {
  std::string output_dir;
  drs::SynthSpec spec;
};

void run_synth(const SynthArgs& args, const CLI::App& cmd) {
  const drs::SynthCorpus corpus = drs::generate_synth(args.spec);
  const std::filesystem::path dir(args.output_dir);
  const auto write = [&](const char* name, const std::vector<drs::Dialogue>& rows) {
    const std::string path = (dir / name).string();
    write_file_atomic(path, drs::serialize_tsv(rows));
    write_sidecar_meta(path, cmd);
  };
  write("train.tsv", corpus.train);
  write("valid.tsv", corpus.valid);
  write("test.tsv", corpus.test);
}

struct PretrainArgs {
  std::string train_path;
  std::string valid_path;
  std::string init_checkpoint;
  std::string checkpoint_dir;
  std::string report_path;
  std::string save_vocab;
  int group_size = 10;
  int min_frequency = 1;
  int max_vocab = 0;
  int dump_encoded = 0;
  bool lenient = false;
  bool no_lowercase = false;
  ModelFlags model;
  TrainFlags train;
};

void run_pretrain(const PretrainArgs& args, const CLI::App& cmd) {
  const drs::ParseResult parsed = drs::parse_tsv_file(args.train_path, !args.lenient);
  const drs::TapSet tap = drs::tap_set_from_dialogues(parsed.dialogues);

  std::optional<drs::Model> model;
  std::optional<drs::Vocabulary> vocab;
  if (!args.init_checkpoint.empty()) {
    drs::Checkpoint loaded = drs::load_checkpoint(args.init_checkpoint);
    model.emplace(std::move(loaded.model));
    vocab.emplace(std::move(loaded.vocab));
  } else {
    vocab.emplace(drs::Vocabulary::build(parsed.dialogues, args.min_frequency,
                                         args.max_vocab,
                                         tokenizer_from(args.no_lowercase)));
    drs::ModelConfig cfg;
    cfg.layers = args.model.layers;
    cfg.heads = args.model.heads;
    cfg.hidden = args.model.hidden;
    cfg.ffn_multiplier = args.model.ffn_multiplier;
    cfg.dropout = args.model.dropout;
    cfg.tie_mlm_decoder = !args.model.untie_mlm_decoder;
    cfg.vocab_size = vocab->size();
    cfg.max_position = args.train.cfg.max_len;
    model.emplace(cfg, args.train.cfg.seed);
  }
  if (!args.save_vocab.empty()) {
    vocab->save(args.save_vocab);
    write_sidecar_meta(args.save_vocab, cmd);
  }
  if (args.dump_encoded > 0) {
    dump_first_encoded(parsed.dialogues, *vocab, args.train.cfg.max_len,
                       args.dump_encoded);
  }

  std::vector<drs::CandidateGroup> valid;
  if (!args.valid_path.empty()) {
    valid = load_groups(args.valid_path, args.group_size, args.lenient);
  }

  drs::TrainConfig cfg = args.train.cfg;
  cfg.checkpoint_dir = args.checkpoint_dir;
  const drs::TrainReport report = drs::pretrain(
      *model, *vocab, tap, cfg, valid.empty() ? nullptr : &valid, {});

  const std::string report_path =
      args.report_path.empty()
          ? (std::filesystem::path(args.checkpoint_dir) / "train_report.jsonl").string()
          : args.report_path;
  write_file_atomic(report_path, drs::to_jsonl(report));
  write_sidecar_meta(report_path, cmd);
}

struct FinetuneArgs {
  std::string checkpoint;
  std::string train_path;
  std::string valid_path;
  std::string output;
  std::string report_path;
  std::string grid_report;
  std::vector<double> lr_grid;
  int group_size = 10;
  int dump_encoded = 0;
  bool lenient = false;
  TrainFlags train;
};

void run_finetune(const FinetuneArgs& args, const CLI::App& cmd) {
  drs::Checkpoint loaded = drs::load_checkpoint(args.checkpoint);
  const drs::ParseResult parsed = drs::parse_tsv_file(args.train_path, !args.lenient);
  if (args.dump_encoded > 0) {
    dump_first_encoded(parsed.dialogues, loaded.vocab, args.train.cfg.max_len,
                       args.dump_encoded);
  }

  std::vector<drs::CandidateGroup> valid;
  if (!args.valid_path.empty()) {
    valid = load_groups(args.valid_path, args.group_size, args.lenient);
  }

  drs::TrainConfig cfg = args.train.cfg;
  drs::TrainReport report;

  if (!args.lr_grid.empty()) {
    if (valid.empty()) {
      throw drs::ConfigError("--lr-grid needs --valid groups to score against");
    }
    const drs::GridResult grid =
        drs::grid_search(args.lr_grid, [&](double lr) -> double {
          drs::Model candidate = loaded.model;
          drs::TrainConfig run_cfg = cfg;
          run_cfg.learning_rate = lr;
          drs::finetune(candidate, loaded.vocab, parsed.dialogues, run_cfg);
          return drs::evaluate(candidate, valid, loaded.vocab, run_cfg.max_len).r_at_1;
        });
    cfg.learning_rate = grid.best_lr;
    json grid_json{{"best_lr", grid.best_lr}, {"best_score", grid.best_score}};
    grid_json["entries"] = json::array();
    for (const drs::GridEntry& entry : grid.entries) {
      json row{{"lr", entry.lr}, {"failed", entry.failed}};
      if (entry.failed) {
        row["error"] = entry.error;
      } else {
        row["score"] = entry.score;
      }
      grid_json["entries"].push_back(std::move(row));
    }
    emit_json(grid_json, cmd, args.grid_report);
  }

  report = drs::finetune(loaded.model, loaded.vocab, parsed.dialogues, cfg,
                         valid.empty() ? nullptr : &valid, {});
  drs::save_checkpoint(loaded.model, loaded.vocab, args.output);
  if (!args.report_path.empty()) {
    write_file_atomic(args.report_path, drs::to_jsonl(report));
    write_sidecar_meta(args.report_path, cmd);
  }
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string test_path;
  std::string output;
  std::string score_dump;
  int group_size = 10;
  int max_len = 0;  // 0: use the checkpoint's maximum
  int batch_size = 64;
  bool lenient = false;
};

void run_evaluate(const EvaluateArgs& args, const CLI::App& cmd) {
  const drs::Checkpoint loaded = drs::load_checkpoint(args.checkpoint);
  const std::vector<drs::CandidateGroup> groups =
      load_groups(args.test_path, args.group_size, args.lenient);
  const int max_len =
      args.max_len > 0 ? args.max_len : loaded.model.config().max_position;

  std::string dump;
  const drs::MetricsReport report =
      drs::evaluate(loaded.model, groups, loaded.vocab, max_len,
                    args.score_dump.empty() ? nullptr : &dump, args.batch_size);
  if (!args.score_dump.empty()) {
    write_file_atomic(args.score_dump, dump);
    write_sidecar_meta(args.score_dump, cmd);
  }
  emit_json(json::parse(drs::to_json_string(report)), cmd, args.output);
}

struct NgramArgs {
  std::string train_path;
  std::string test_path;
  std::string output;
  int n = 5;
  std::string mode = "exact";
  bool lenient = false;
  bool no_lowercase = false;
};

void run_ngram(const NgramArgs& args, const CLI::App& cmd) {
  const drs::ParseResult train = drs::parse_tsv_file(args.train_path, !args.lenient);
  const drs::ParseResult test = drs::parse_tsv_file(args.test_path, !args.lenient);
  const drs::NgramMode mode =
      args.mode == "hashed" ? drs::NgramMode::kHashed : drs::NgramMode::kExact;
  const drs::NgramReport report =
      drs::overlap_report(train.dialogues, test.dialogues, args.n, mode,
                          tokenizer_from(args.no_lowercase));
  emit_json(json::parse(drs::to_json_string(report)), cmd, args.output);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue response selection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", drs::kVersion);
  // One config option on the root: CLI11 only reads config files there.
  // Files address subcommand options through sections, e.g. [ngram]\nn=2.
  // Fallthrough lets the flag appear after the subcommand name as well.
  app.fallthrough();
  app.set_config("--config", "",
                 "Read options from an INI/TOML file ([subcommand] sections)");

  // stats ------------------------------------------------------------------
  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "Corpus statistics as JSON");
  stats->add_option("--input", stats_args.input, "Labeled TSV corpus")->required();
  stats->add_option("--output", stats_args.output, "Write JSON here instead of stdout");
  stats->add_flag("--lenient", stats_args.lenient, "Skip malformed lines instead of aborting");

  // augment ----------------------------------------------------------------
  AugmentArgs augment_args;
  CLI::App* augment = app.add_subcommand(
      "augment", "Expand dialogues into the pre-training pair set");
  augment->add_option("--input", augment_args.input, "Labeled TSV corpus")->required();
  augment->add_option("--output", augment_args.output, "Output TSV path")->required();
  augment->add_option("--ratio", augment_args.ratio, "Negatives per positive pair")
      ->capture_default_str();
  augment->add_option("--seed", augment_args.seed, "Sampling/shuffle seed")
      ->capture_default_str();
  augment->add_flag("--lenient", augment_args.lenient,
                    "Skip malformed lines instead of aborting");

  // synth ------------------------------------------------------------------
  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate the separable synthetic benchmark corpus");
  synth->add_option("--output-dir", synth_args.output_dir, "Directory for the three TSVs")
      ->required();
  synth->add_option("--dialogues", synth_args.spec.dialogues, "Train dialogues")
      ->capture_default_str();
  synth->add_option("--turns-min", synth_args.spec.turns_min, "Minimum context turns")
      ->capture_default_str();
  synth->add_option("--turns-max", synth_args.spec.turns_max, "Maximum context turns")
      ->capture_default_str();
  synth->add_option("--vocab-size", synth_args.spec.vocab_size, "Surface token count")
      ->capture_default_str();
  synth->add_option("--valid-groups", synth_args.spec.valid_groups, "Validation groups")
      ->capture_default_str();
  synth->add_option("--test-groups", synth_args.spec.test_groups, "Test groups")
      ->capture_default_str();
  synth->add_option("--group-size", synth_args.spec.group_size, "Candidates per group")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed, "Generation seed")
      ->capture_default_str();

  // pretrain ----------------------------------------------------------------
  PretrainArgs pre_args;
  CLI::App* pretrain = app.add_subcommand(
      "pretrain", "Task-adaptive pre-training on an augmented pair set");
  pretrain->add_option("--train", pre_args.train_path, "Augmented pair TSV")->required();
  pretrain->add_option("--valid", pre_args.valid_path,
                       "Candidate-group TSV scored for R@1 each epoch");
  pretrain->add_option("--group-size", pre_args.group_size, "Candidates per valid group")
      ->capture_default_str();
  pretrain->add_option("--init-checkpoint", pre_args.init_checkpoint,
                       "Continue from this checkpoint instead of fresh init");
  pretrain->add_option("--checkpoint-dir", pre_args.checkpoint_dir,
                       "Where checkpoints and the default report land")
      ->required();
  pretrain->add_option("--report", pre_args.report_path,
                       "Training report JSONL path (default: <checkpoint-dir>/train_report.jsonl)");
  pretrain->add_option("--save-vocab", pre_args.save_vocab,
                       "Also write the built vocabulary here");
  pretrain->add_option("--min-frequency", pre_args.min_frequency,
                       "Vocabulary frequency cutoff")
      ->capture_default_str();
  pretrain->add_option("--max-vocab", pre_args.max_vocab,
                       "Vocabulary size cap, 0 = unlimited")
      ->capture_default_str();
  pretrain->add_option("--dump-first-encoded", pre_args.dump_encoded,
                       "Debug: print this many encoded instances to stderr");
  pretrain->add_flag("--lenient", pre_args.lenient,
                     "Skip malformed lines instead of aborting");
  pretrain->add_flag("--no-lowercase", pre_args.no_lowercase,
                     "Keep original casing when building the vocabulary");
  pre_args.model.attach(*pretrain);
  pre_args.train.attach(*pretrain, /*pretraining=*/true);

  // finetune ----------------------------------------------------------------
  FinetuneArgs ft_args;
  CLI::App* finetune = app.add_subcommand(
      "finetune", "Fine-tune a checkpoint on original labeled pairs");
  finetune->add_option("--checkpoint", ft_args.checkpoint, "Starting checkpoint")
      ->required();
  finetune->add_option("--train", ft_args.train_path, "Labeled TSV corpus")->required();
  finetune->add_option("--valid", ft_args.valid_path,
                       "Candidate-group TSV for per-epoch R@1 / grid scoring");
  finetune->add_option("--group-size", ft_args.group_size, "Candidates per valid group")
      ->capture_default_str();
  finetune->add_option("--output", ft_args.output, "Fine-tuned checkpoint path")
      ->required();
  finetune->add_option("--report", ft_args.report_path, "Training report JSONL path");
  finetune->add_option("--lr-grid", ft_args.lr_grid,
                       "Grid-search these learning rates on --valid, then train at the best")
      ->delimiter(',');
  finetune->add_option("--grid-report", ft_args.grid_report,
                       "Write grid-search results here instead of stdout");
  finetune->add_option("--dump-first-encoded", ft_args.dump_encoded,
                       "Debug: print this many encoded instances to stderr");
  finetune->add_flag("--lenient", ft_args.lenient,
                     "Skip malformed lines instead of aborting");
  ft_args.train.attach(*finetune, /*pretraining=*/false);

  // evaluate ----------------------------------------------------------------
  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Rank candidate groups and report recall/MAP/MRR");
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Model checkpoint")
      ->required();
  evaluate->add_option("--test", eval_args.test_path, "Candidate-group TSV")->required();
  evaluate->add_option("--group-size", eval_args.group_size, "Candidates per group")
      ->capture_default_str();
  evaluate->add_option("--max-len", eval_args.max_len,
                       "Encoded length, 0 = the checkpoint's maximum")
      ->capture_default_str();
  evaluate->add_option("--batch-size", eval_args.batch_size, "Scoring batch size")
      ->capture_default_str();
  evaluate->add_option("--output", eval_args.output, "Write JSON here instead of stdout");
  evaluate->add_option("--score-dump", eval_args.score_dump,
                       "Per-candidate score TSV for external re-scoring");
  evaluate->add_flag("--lenient", eval_args.lenient,
                     "Skip malformed lines instead of aborting");

  // ngram -------------------------------------------------------------------
  NgramArgs ngram_args;
  CLI::App* ngram = app.add_subcommand(
      "ngram", "Train/test n-gram overlap diagnostics");
  ngram->add_option("--train", ngram_args.train_path, "Training TSV")->required();
  ngram->add_option("--test", ngram_args.test_path, "Test TSV")->required();
  ngram->add_option("--n", ngram_args.n, "N-gram order")->capture_default_str();
  ngram->add_option("--mode", ngram_args.mode, "exact or hashed")
      ->check(CLI::IsMember({"exact", "hashed"}))
      ->capture_default_str();
  ngram->add_option("--output", ngram_args.output, "Write JSON here instead of stdout");
  ngram->add_flag("--lenient", ngram_args.lenient,
                  "Skip malformed lines instead of aborting");
  ngram->add_flag("--no-lowercase", ngram_args.no_lowercase,
                  "Keep original casing when tokenizing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (stats->parsed()) {
      run_stats(stats_args, *stats);
    } else if (augment->parsed()) {
      run_augment(augment_args, *augment);
    } else if (synth->parsed()) {
      run_synth(synth_args, *synth);
    } else if (pretrain->parsed()) {
      run_pretrain(pre_args, *pretrain);
    } else if (finetune->parsed()) {
      run_finetune(ft_args, *finetune);
    } else if (evaluate->parsed()) {
      run_evaluate(eval_args, *evaluate);
    } else if (ngram->parsed()) {
      run_ngram(ngram_args, *ngram);
    }
  } catch (const drs::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const drs::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const drs::TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
