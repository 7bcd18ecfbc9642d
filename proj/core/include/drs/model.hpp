#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drs/corpus.hpp"
#include "drs/encode.hpp"

namespace drs {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int hidden = 32;
  int ffn_multiplier = 4;
  int vocab_size = 0;
  int max_position = 64;
  int segment_types = 2;
  double dropout = 0.0;
  bool tie_mlm_decoder = true;

  int ffn_size() const { return ffn_multiplier * hidden; }
  int head_dim() const { return hidden / heads; }

  /// Throws ConfigError on indivisible hidden/heads or non-positive sizes.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  std::int64_t offset = 0;  // element offset into the flat buffer
  int rows = 0;
  int cols = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
};

/// All parameters of one model in a single flat buffer with named row-major
/// views. Gradients, Adam moments, and checkpoints reuse the same layout.
class ParamStore {
 public:
  explicit ParamStore(const ModelConfig& cfg);

  int count() const { return static_cast<int>(tensors_.size()); }
  const TensorInfo& info(int index) const { return tensors_[static_cast<std::size_t>(index)]; }
  int index_of(std::string_view name) const;  // -1 when absent

  MatrixMap view(int index);
  ConstMatrixMap view(int index) const;
  MatrixMap view(std::string_view name);
  ConstMatrixMap view(std::string_view name) const;

  std::vector<double>& flat() { return data_; }
  const std::vector<double>& flat() const { return data_; }
  std::int64_t total_size() const { return static_cast<std::int64_t>(data_.size()); }
  void fill_zero();

 private:
  std::vector<TensorInfo> tensors_;
  std::unordered_map<std::string, int> by_name_;
  std::vector<double> data_;
};

/// What produced these weights. Stored in every checkpoint.
struct TrainingProvenance {
  std::string task_mix = "none";
  int epochs = 0;
  std::uint64_t seed = 0;
};

/// Dense batch view over same-length encoded instances.
struct Batch {
  int size = 0;    // instances
  int length = 0;  // tokens per instance
  std::vector<std::int32_t> token_ids;       // size*length, row-major
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> attention_mask;
  std::vector<std::int32_t> mlm_labels;
  std::vector<std::int32_t> nsp_labels;

  static Batch from_instances(std::span<const EncodedInstance> instances);
};

struct ForwardResult {
  Matrix nsp_logits;  // size x 2
  Matrix mlm_logits;  // (size*length) x vocab_size, row r = instance r/L, position r%L
};

struct LossBreakdown {
  double total = 0.0;
  double nsp = 0.0;
  double mlm = 0.0;
  std::int64_t masked_positions = 0;
  int batch = 0;
};

struct LossOptions {
  bool nsp_task = true;
  bool mlm_task = true;
  double mlm_weight = 1.0;
  /// Stream for dropout masks; only read when config.dropout > 0.
  std::uint64_t dropout_seed = 0;
  bool training = false;  // dropout active only while training
};

/// Transformer cross-encoder over concatenated context/response inputs with
/// a binary match head (pooled start-token representation) and a token
/// reconstruction head over the vocabulary.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  std::uint64_t vocab_fingerprint() const { return vocab_fingerprint_; }
  /// Record (or verify, when already recorded) the vocabulary this model is
  /// trained against. Throws ConfigError on size or fingerprint mismatch.
  void bind_vocab(const Vocabulary& vocab);
  /// Verify a vocabulary against the recorded fingerprint without binding.
  void check_vocab(const Vocabulary& vocab) const;

  TrainingProvenance& provenance() { return provenance_; }
  const TrainingProvenance& provenance() const { return provenance_; }
  TokenizerOptions& tokenizer_options() { return tok_opts_; }
  const TokenizerOptions& tokenizer_options() const { return tok_opts_; }

  /// Evaluation-mode forward pass (no dropout): match logits for every
  /// instance and reconstruction logits for every position.
  ForwardResult forward(const Batch& batch) const;

  /// Loss under the given task options; when `grads` is non-null also
  /// accumulates parameter gradients (same layout as params()) into it.
  LossBreakdown loss(const Batch& batch, const LossOptions& opts,
                     ParamStore* grads) const;

  /// P(response follows context) for one pair; encodes, runs the match head,
  /// applies softmax. Verifies the vocabulary fingerprint first.
  double nsp_score(const std::vector<std::string>& context, const std::string& response,
                   const Vocabulary& vocab, int max_len) const;

  /// Batched P(class 1) for pre-encoded instances.
  std::vector<double> nsp_probabilities(std::span<const EncodedInstance> instances,
                                        int batch_size = 64) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  std::uint64_t vocab_fingerprint_ = 0;
  TrainingProvenance provenance_;
  TokenizerOptions tok_opts_;
};

/// Single-file checkpoint: header (config, tokenizer options, vocabulary,
/// provenance, tensor directory as JSON) followed by raw little-endian
/// float64 tensor data. Written atomically via rename.
void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const std::string& path);

struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

/// Load and cross-check a checkpoint. Missing tensors are reported by name;
/// the stored vocabulary must reproduce the stored fingerprint.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace drs
