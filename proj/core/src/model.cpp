#include "drs/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "drs/errors.hpp"
#include "drs/rng.hpp"
#include "drs/version.hpp"

namespace drs {
namespace {

// The checkpoint format stores raw float64 in file byte order; the loaders
// below memcpy directly, which is only correct on little-endian hosts.
static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr double kLayerNormEps = 1e-12;
constexpr double kAttentionPenalty = -1e9;
constexpr char kCheckpointMagic[8] = {'D', 'R', 'S', 'C', 'K', 'P', 'T', '1'};

// Gradient magnitudes cascade multiplicatively during back-propagation and
// routinely underflow past the smallest normal double (~2.2e-308). x86 cores
// handle such subnormal operands through microcode assists that slow the
// matrix kernels by an order of magnitude, so all numeric entry points flush
// subnormals to zero for the duration of the call; values that small are
// thousands of orders of magnitude below optimizer precision. The previous
// control-register state is restored on scope exit, and nesting is harmless.
class ScopedSubnormalFlush {
 public:
  ScopedSubnormalFlush() {
#if defined(__SSE2__)
    csr_ = _mm_getcsr();
    _mm_setcsr(csr_ | 0x8040);  // FTZ (bit 15) and DAZ (bit 6)
#endif
  }
  ~ScopedSubnormalFlush() {
#if defined(__SSE2__)
    _mm_setcsr(csr_);
#endif
  }
  ScopedSubnormalFlush(const ScopedSubnormalFlush&) = delete;
  ScopedSubnormalFlush& operator=(const ScopedSubnormalFlush&) = delete;

 private:
#if defined(__SSE2__)
  unsigned int csr_ = 0;
#endif
};

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

struct LnCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, ConstMatrixMap gain, ConstMatrixMap bias,
                  LnCache* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = x.cols();
  Matrix xhat(n, h);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / static_cast<double>(h);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = ((x.row(i).array() - mean) * is).matrix();
    inv_std(i) = is;
  }
  Matrix y(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    y.row(i) = xhat.row(i).cwiseProduct(gain.row(0)) + bias.row(0);
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& d_out, const LnCache& cache,
                           ConstMatrixMap gain, MatrixMap d_gain, MatrixMap d_bias) {
  const Eigen::Index n = d_out.rows();
  const Eigen::Index h = d_out.cols();
  Matrix dx(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxhat = d_out.row(i).cwiseProduct(gain.row(0));
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) =
        ((dxhat.array() - m1 - cache.xhat.row(i).array() * m2) * cache.inv_std(i))
            .matrix();
  }
  d_gain.row(0) += d_out.cwiseProduct(cache.xhat).colwise().sum();
  d_bias.row(0) += d_out.colwise().sum();
  return dx;
}

// y = x * W + b with W laid out [in, out].
Matrix linear(const Matrix& x, ConstMatrixMap w, ConstMatrixMap b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Accumulates dW and db and returns dx.
Matrix linear_backward(const Matrix& x, const Matrix& d_y, ConstMatrixMap w,
                       MatrixMap d_w, MatrixMap d_b) {
  d_w += x.transpose() * d_y;
  d_b.row(0) += d_y.colwise().sum();
  return d_y * w.transpose();
}

// Inverted dropout mask: entries are 0 with probability p, 1/(1-p) otherwise.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  const double scale = 1.0 / (1.0 - p);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = rng.next_unit() < p ? 0.0 : scale;
    }
  }
  return m;
}

std::string layer_tensor(int layer, const char* suffix) {
  return "encoder." + std::to_string(layer) + "." + suffix;
}

struct LayerCache {
  Matrix input;               // N x H, input to this layer
  Matrix q, k, v;             // N x H
  std::vector<Matrix> probs;  // attention rows per (instance, head), pre-dropout
  std::vector<Matrix> prob_drop;
  Matrix heads;               // N x H, concatenated per-head contexts
  Matrix attn_drop;
  LnCache ln1;
  Matrix ln1_out;             // N x H
  Matrix ffn_pre;             // N x F
  Matrix ffn_act;             // N x F
  Matrix ffn_drop;
  LnCache ln2;
};

struct TrunkCache {
  Matrix emb_drop;
  LnCache emb_ln;
  std::vector<LayerCache> layers;
  Matrix out;  // N x H
};

void check_batch(const ModelConfig& cfg, const Batch& batch) {
  if (batch.size <= 0 || batch.length <= 0) {
    throw DataError("empty batch");
  }
  if (batch.length > cfg.max_position) {
    throw ConfigError("sequence length " + std::to_string(batch.length) +
                      " exceeds the model's max_position " +
                      std::to_string(cfg.max_position));
  }
  const std::size_t n = static_cast<std::size_t>(batch.size) * batch.length;
  if (batch.token_ids.size() != n || batch.segment_ids.size() != n ||
      batch.attention_mask.size() != n || batch.mlm_labels.size() != n ||
      batch.nsp_labels.size() != static_cast<std::size_t>(batch.size)) {
    throw DataError("batch channel sizes disagree with size*length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t t = batch.token_ids[i];
    if (t < 0 || t >= cfg.vocab_size) {
      throw DataError("token id " + std::to_string(t) +
                      " out of range for vocabulary of size " +
                      std::to_string(cfg.vocab_size));
    }
    const std::int32_t s = batch.segment_ids[i];
    if (s < 0 || s >= cfg.segment_types) {
      throw DataError("segment id " + std::to_string(s) + " out of range");
    }
  }
}

// Embeddings + encoder stack. Caller passes a dropout generator only while
// training with dropout enabled; cache is always filled so that a backward
// pass can follow.
void run_trunk(const ModelConfig& cfg, const ParamStore& params, const Batch& batch,
               double p_drop, Rng* drop_rng, TrunkCache& cache) {
  check_batch(cfg, batch);
  const int batch_count = batch.size;
  const int len = batch.length;
  const Eigen::Index n = static_cast<Eigen::Index>(batch_count) * len;
  const int hidden = cfg.hidden;
  const int head_dim = cfg.head_dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Matrix x(n, hidden);
  {
    ConstMatrixMap word = params.view("embeddings.word");
    ConstMatrixMap pos = params.view("embeddings.position");
    ConstMatrixMap seg = params.view("embeddings.segment");
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = word.row(batch.token_ids[static_cast<std::size_t>(i)]) +
                 pos.row(i % len) +
                 seg.row(batch.segment_ids[static_cast<std::size_t>(i)]);
    }
  }
  x = layer_norm(x, params.view("embeddings.norm.gain"),
                 params.view("embeddings.norm.bias"), &cache.emb_ln);
  if (drop_rng != nullptr) {
    cache.emb_drop = dropout_mask(n, hidden, p_drop, *drop_rng);
    x = x.cwiseProduct(cache.emb_drop);
  }

  cache.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (int l = 0; l < cfg.layers; ++l) {
    LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    lc.input = std::move(x);
    lc.q = linear(lc.input, params.view(layer_tensor(l, "attn.query.weight")),
                  params.view(layer_tensor(l, "attn.query.bias")));
    lc.k = linear(lc.input, params.view(layer_tensor(l, "attn.key.weight")),
                  params.view(layer_tensor(l, "attn.key.bias")));
    lc.v = linear(lc.input, params.view(layer_tensor(l, "attn.value.weight")),
                  params.view(layer_tensor(l, "attn.value.bias")));
    lc.heads.setZero(n, hidden);
    lc.probs.reserve(static_cast<std::size_t>(batch_count) * cfg.heads);
    for (int b = 0; b < batch_count; ++b) {
      const Eigen::Index n0 = static_cast<Eigen::Index>(b) * len;
      Eigen::RowVectorXd key_mask(len);
      for (int j = 0; j < len; ++j) {
        key_mask(j) =
            batch.attention_mask[static_cast<std::size_t>(n0) + j] != 0
                ? 0.0
                : kAttentionPenalty;
      }
      for (int h = 0; h < cfg.heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
        Matrix scores = lc.q.block(n0, c0, len, head_dim) *
                        lc.k.block(n0, c0, len, head_dim).transpose() * inv_sqrt_d;
        scores.rowwise() += key_mask;
        Matrix probs(len, len);
        for (int i = 0; i < len; ++i) {
          const double row_max = scores.row(i).maxCoeff();
          const Eigen::RowVectorXd e = (scores.row(i).array() - row_max).exp().matrix();
          probs.row(i) = e / e.sum();
        }
        if (drop_rng != nullptr) {
          Matrix mask = dropout_mask(len, len, p_drop, *drop_rng);
          lc.heads.block(n0, c0, len, head_dim) =
              probs.cwiseProduct(mask) * lc.v.block(n0, c0, len, head_dim);
          lc.prob_drop.push_back(std::move(mask));
        } else {
          lc.heads.block(n0, c0, len, head_dim) =
              probs * lc.v.block(n0, c0, len, head_dim);
        }
        lc.probs.push_back(std::move(probs));
      }
    }
    Matrix attn = linear(lc.heads, params.view(layer_tensor(l, "attn.output.weight")),
                         params.view(layer_tensor(l, "attn.output.bias")));
    if (drop_rng != nullptr) {
      lc.attn_drop = dropout_mask(n, hidden, p_drop, *drop_rng);
      attn = attn.cwiseProduct(lc.attn_drop);
    }
    lc.ln1_out = layer_norm(lc.input + attn, params.view(layer_tensor(l, "attn.norm.gain")),
                            params.view(layer_tensor(l, "attn.norm.bias")), &lc.ln1);
    lc.ffn_pre = linear(lc.ln1_out, params.view(layer_tensor(l, "ffn.input.weight")),
                        params.view(layer_tensor(l, "ffn.input.bias")));
    lc.ffn_act = lc.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ffn = linear(lc.ffn_act, params.view(layer_tensor(l, "ffn.output.weight")),
                        params.view(layer_tensor(l, "ffn.output.bias")));
    if (drop_rng != nullptr) {
      lc.ffn_drop = dropout_mask(n, hidden, p_drop, *drop_rng);
      ffn = ffn.cwiseProduct(lc.ffn_drop);
    }
    x = layer_norm(lc.ln1_out + ffn, params.view(layer_tensor(l, "ffn.norm.gain")),
                   params.view(layer_tensor(l, "ffn.norm.bias")), &lc.ln2);
  }
  cache.out = std::move(x);
}

// Backward through the encoder stack and embeddings given d(encoder output).
void trunk_backward(const ModelConfig& cfg, const ParamStore& params,
                    const Batch& batch, const TrunkCache& cache, Matrix d_out,
                    ParamStore& grads) {
  const int batch_count = batch.size;
  const int len = batch.length;
  const int head_dim = cfg.head_dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const bool dropped = cache.emb_drop.size() > 0;

  Matrix d = std::move(d_out);
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    Matrix d_x2 = layer_norm_backward(d, lc.ln2, params.view(layer_tensor(l, "ffn.norm.gain")),
                                      grads.view(layer_tensor(l, "ffn.norm.gain")),
                                      grads.view(layer_tensor(l, "ffn.norm.bias")));
    Matrix d_ln1_out = d_x2;
    Matrix d_ffn = std::move(d_x2);
    if (dropped) {
      d_ffn = d_ffn.cwiseProduct(lc.ffn_drop);
    }
    Matrix d_act = linear_backward(lc.ffn_act, d_ffn,
                                   params.view(layer_tensor(l, "ffn.output.weight")),
                                   grads.view(layer_tensor(l, "ffn.output.weight")),
                                   grads.view(layer_tensor(l, "ffn.output.bias")));
    Matrix d_pre =
        d_act.cwiseProduct(lc.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
    d_ln1_out += linear_backward(lc.ln1_out, d_pre,
                                 params.view(layer_tensor(l, "ffn.input.weight")),
                                 grads.view(layer_tensor(l, "ffn.input.weight")),
                                 grads.view(layer_tensor(l, "ffn.input.bias")));
    Matrix d_x1 = layer_norm_backward(d_ln1_out, lc.ln1,
                                      params.view(layer_tensor(l, "attn.norm.gain")),
                                      grads.view(layer_tensor(l, "attn.norm.gain")),
                                      grads.view(layer_tensor(l, "attn.norm.bias")));
    Matrix d_input = d_x1;
    Matrix d_attn = std::move(d_x1);
    if (dropped) {
      d_attn = d_attn.cwiseProduct(lc.attn_drop);
    }
    Matrix d_heads = linear_backward(lc.heads, d_attn,
                                     params.view(layer_tensor(l, "attn.output.weight")),
                                     grads.view(layer_tensor(l, "attn.output.weight")),
                                     grads.view(layer_tensor(l, "attn.output.bias")));
    Matrix d_q = Matrix::Zero(d.rows(), cfg.hidden);
    Matrix d_k = Matrix::Zero(d.rows(), cfg.hidden);
    Matrix d_v = Matrix::Zero(d.rows(), cfg.hidden);
    for (int b = 0; b < batch_count; ++b) {
      const Eigen::Index n0 = static_cast<Eigen::Index>(b) * len;
      for (int h = 0; h < cfg.heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
        const std::size_t idx = static_cast<std::size_t>(b) * cfg.heads + h;
        const Matrix& probs = lc.probs[idx];
        const auto d_ctx = d_heads.block(n0, c0, len, head_dim);
        const auto v_h = lc.v.block(n0, c0, len, head_dim);
        Matrix d_probs;
        if (dropped) {
          const Matrix& mask = lc.prob_drop[idx];
          d_v.block(n0, c0, len, head_dim) =
              probs.cwiseProduct(mask).transpose() * d_ctx;
          d_probs = (d_ctx * v_h.transpose()).cwiseProduct(mask);
        } else {
          d_v.block(n0, c0, len, head_dim) = probs.transpose() * d_ctx;
          d_probs = d_ctx * v_h.transpose();
        }
        Matrix d_scores(len, len);
        for (int i = 0; i < len; ++i) {
          const double dot = d_probs.row(i).dot(probs.row(i));
          const Eigen::RowVectorXd adjusted = (d_probs.row(i).array() - dot).matrix();
          d_scores.row(i) = probs.row(i).cwiseProduct(adjusted);
        }
        d_scores *= inv_sqrt_d;
        d_q.block(n0, c0, len, head_dim) = d_scores * lc.k.block(n0, c0, len, head_dim);
        d_k.block(n0, c0, len, head_dim) =
            d_scores.transpose() * lc.q.block(n0, c0, len, head_dim);
      }
    }
    d_input += linear_backward(lc.input, d_q, params.view(layer_tensor(l, "attn.query.weight")),
                               grads.view(layer_tensor(l, "attn.query.weight")),
                               grads.view(layer_tensor(l, "attn.query.bias")));
    d_input += linear_backward(lc.input, d_k, params.view(layer_tensor(l, "attn.key.weight")),
                               grads.view(layer_tensor(l, "attn.key.weight")),
                               grads.view(layer_tensor(l, "attn.key.bias")));
    d_input += linear_backward(lc.input, d_v, params.view(layer_tensor(l, "attn.value.weight")),
                               grads.view(layer_tensor(l, "attn.value.weight")),
                               grads.view(layer_tensor(l, "attn.value.bias")));
    d = std::move(d_input);
  }

  if (dropped) {
    d = d.cwiseProduct(cache.emb_drop);
  }
  Matrix d_sum = layer_norm_backward(d, cache.emb_ln, params.view("embeddings.norm.gain"),
                                     grads.view("embeddings.norm.gain"),
                                     grads.view("embeddings.norm.bias"));
  MatrixMap d_word = grads.view("embeddings.word");
  MatrixMap d_pos = grads.view("embeddings.position");
  MatrixMap d_seg = grads.view("embeddings.segment");
  for (Eigen::Index i = 0; i < d_sum.rows(); ++i) {
    d_word.row(batch.token_ids[static_cast<std::size_t>(i)]) += d_sum.row(i);
    d_pos.row(i % len) += d_sum.row(i);
    d_seg.row(batch.segment_ids[static_cast<std::size_t>(i)]) += d_sum.row(i);
  }
}

// Row-stable softmax cross entropy; returns the mean loss and writes
// d(logits) scaled by `grad_scale` into d_logits when non-null.
double softmax_cross_entropy(const Matrix& logits, const std::vector<std::int32_t>& labels,
                             double grad_scale, Matrix* d_logits) {
  const Eigen::Index rows = logits.rows();
  double total = 0.0;
  if (d_logits != nullptr) {
    d_logits->resize(rows, logits.cols());
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double row_max = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - row_max).exp().matrix();
    const double z = e.sum();
    const auto label = labels[static_cast<std::size_t>(i)];
    total += std::log(z) - (logits(i, label) - row_max);
    if (d_logits != nullptr) {
      d_logits->row(i) = e / z * grad_scale;
      (*d_logits)(i, label) -= grad_scale;
    }
  }
  return total / static_cast<double>(rows);
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return std::string(buf);
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || hidden < 1 || ffn_multiplier < 1 ||
      max_position < 1 || segment_types < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (vocab_size < Vocabulary::kNumSpecial) {
    throw ConfigError("vocab_size must cover at least the " +
                      std::to_string(Vocabulary::kNumSpecial) + " special tokens");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) +
                      " is not divisible by head count " + std::to_string(heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
}

ParamStore::ParamStore(const ModelConfig& cfg) {
  std::int64_t offset = 0;
  const auto add = [&](std::string name, int rows, int cols) {
    by_name_.emplace(name, static_cast<int>(tensors_.size()));
    tensors_.push_back(TensorInfo{std::move(name), offset, rows, cols});
    offset += static_cast<std::int64_t>(rows) * cols;
  };
  const int h = cfg.hidden;
  const int f = cfg.ffn_size();
  add("embeddings.word", cfg.vocab_size, h);
  add("embeddings.position", cfg.max_position, h);
  add("embeddings.segment", cfg.segment_types, h);
  add("embeddings.norm.gain", 1, h);
  add("embeddings.norm.bias", 1, h);
  for (int l = 0; l < cfg.layers; ++l) {
    add(layer_tensor(l, "attn.query.weight"), h, h);
    add(layer_tensor(l, "attn.query.bias"), 1, h);
    add(layer_tensor(l, "attn.key.weight"), h, h);
    add(layer_tensor(l, "attn.key.bias"), 1, h);
    add(layer_tensor(l, "attn.value.weight"), h, h);
    add(layer_tensor(l, "attn.value.bias"), 1, h);
    add(layer_tensor(l, "attn.output.weight"), h, h);
    add(layer_tensor(l, "attn.output.bias"), 1, h);
    add(layer_tensor(l, "attn.norm.gain"), 1, h);
    add(layer_tensor(l, "attn.norm.bias"), 1, h);
    add(layer_tensor(l, "ffn.input.weight"), h, f);
    add(layer_tensor(l, "ffn.input.bias"), 1, f);
    add(layer_tensor(l, "ffn.output.weight"), f, h);
    add(layer_tensor(l, "ffn.output.bias"), 1, h);
    add(layer_tensor(l, "ffn.norm.gain"), 1, h);
    add(layer_tensor(l, "ffn.norm.bias"), 1, h);
  }
  add("pooler.weight", h, h);
  add("pooler.bias", 1, h);
  add("nsp_head.weight", h, 2);
  add("nsp_head.bias", 1, 2);
  add("mlm_head.dense.weight", h, h);
  add("mlm_head.dense.bias", 1, h);
  add("mlm_head.norm.gain", 1, h);
  add("mlm_head.norm.bias", 1, h);
  add("mlm_head.output.bias", 1, cfg.vocab_size);
  if (!cfg.tie_mlm_decoder) {
    add("mlm_head.output.weight", cfg.vocab_size, h);
  }
  data_.assign(static_cast<std::size_t>(offset), 0.0);
}

int ParamStore::index_of(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? -1 : it->second;
}

MatrixMap ParamStore::view(int index) {
  const TensorInfo& t = tensors_[static_cast<std::size_t>(index)];
  return MatrixMap(data_.data() + t.offset, t.rows, t.cols);
}

ConstMatrixMap ParamStore::view(int index) const {
  const TensorInfo& t = tensors_[static_cast<std::size_t>(index)];
  return ConstMatrixMap(data_.data() + t.offset, t.rows, t.cols);
}

MatrixMap ParamStore::view(std::string_view name) {
  const int i = index_of(name);
  if (i < 0) {
    throw ConfigError("unknown tensor: " + std::string(name));
  }
  return view(i);
}

ConstMatrixMap ParamStore::view(std::string_view name) const {
  const int i = index_of(name);
  if (i < 0) {
    throw ConfigError("unknown tensor: " + std::string(name));
  }
  return view(i);
}

void ParamStore::fill_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

Batch Batch::from_instances(std::span<const EncodedInstance> instances) {
  if (instances.empty()) {
    throw DataError("cannot build a batch from zero instances");
  }
  Batch batch;
  batch.size = static_cast<int>(instances.size());
  batch.length = instances.front().length();
  const std::size_t total =
      static_cast<std::size_t>(batch.size) * static_cast<std::size_t>(batch.length);
  batch.token_ids.reserve(total);
  batch.segment_ids.reserve(total);
  batch.attention_mask.reserve(total);
  batch.mlm_labels.reserve(total);
  batch.nsp_labels.reserve(static_cast<std::size_t>(batch.size));
  for (const EncodedInstance& inst : instances) {
    if (inst.length() != batch.length) {
      throw DataError("instances in a batch must share one length, got " +
                      std::to_string(inst.length()) + " and " +
                      std::to_string(batch.length));
    }
    batch.token_ids.insert(batch.token_ids.end(), inst.token_ids.begin(),
                           inst.token_ids.end());
    batch.segment_ids.insert(batch.segment_ids.end(), inst.segment_ids.begin(),
                             inst.segment_ids.end());
    batch.attention_mask.insert(batch.attention_mask.end(), inst.attention_mask.begin(),
                                inst.attention_mask.end());
    batch.mlm_labels.insert(batch.mlm_labels.end(), inst.mlm_labels.begin(),
                            inst.mlm_labels.end());
    batch.nsp_labels.push_back(inst.nsp_label);
  }
  return batch;
}

Model::Model(ModelConfig cfg, std::uint64_t init_seed)
    : cfg_((cfg.validate(), cfg)), params_(cfg_) {
  Rng rng = Rng::from_path(init_seed, StreamTag::kInit);
  for (int i = 0; i < params_.count(); ++i) {
    const TensorInfo& t = params_.info(i);
    MatrixMap v = params_.view(i);
    if (t.name.ends_with(".norm.gain")) {
      v.setOnes();
    } else if (t.name.ends_with(".bias")) {
      v.setZero();
    } else {
      for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.cols; ++c) {
          v(r, c) = rng.next_truncated_gaussian(0.02);
        }
      }
    }
  }
}

void Model::bind_vocab(const Vocabulary& vocab) {
  check_vocab(vocab);
  vocab_fingerprint_ = vocab.fingerprint();
}

void Model::check_vocab(const Vocabulary& vocab) const {
  if (vocab.size() != cfg_.vocab_size) {
    throw ConfigError("model expects a vocabulary of size " +
                      std::to_string(cfg_.vocab_size) + ", got " +
                      std::to_string(vocab.size()));
  }
  if (vocab_fingerprint_ != 0 && vocab.fingerprint() != vocab_fingerprint_) {
    throw ConfigError(
        "vocabulary fingerprint mismatch: the model was trained against a "
        "different vocabulary");
  }
}

ForwardResult Model::forward(const Batch& batch) const {
  ScopedSubnormalFlush flush_subnormals;
  TrunkCache cache;
  run_trunk(cfg_, params_, batch, 0.0, nullptr, cache);

  ForwardResult result;
  Matrix cls(batch.size, cfg_.hidden);
  for (int b = 0; b < batch.size; ++b) {
    cls.row(b) = cache.out.row(static_cast<Eigen::Index>(b) * batch.length);
  }
  const Matrix pooled =
      linear(cls, params_.view("pooler.weight"), params_.view("pooler.bias"))
          .unaryExpr([](double v) { return std::tanh(v); });
  result.nsp_logits =
      linear(pooled, params_.view("nsp_head.weight"), params_.view("nsp_head.bias"));

  Matrix pre = linear(cache.out, params_.view("mlm_head.dense.weight"),
                      params_.view("mlm_head.dense.bias"));
  Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
  Matrix hid = layer_norm(act, params_.view("mlm_head.norm.gain"),
                          params_.view("mlm_head.norm.bias"), nullptr);
  ConstMatrixMap decoder = cfg_.tie_mlm_decoder
                               ? params_.view("embeddings.word")
                               : params_.view("mlm_head.output.weight");
  result.mlm_logits = hid * decoder.transpose();
  result.mlm_logits.rowwise() += params_.view("mlm_head.output.bias").row(0);
  return result;
}

LossBreakdown Model::loss(const Batch& batch, const LossOptions& opts,
                          ParamStore* grads) const {
  ScopedSubnormalFlush flush_subnormals;
  const double p_drop = (opts.training && cfg_.dropout > 0.0) ? cfg_.dropout : 0.0;
  Rng drop_rng = Rng::from_path(opts.dropout_seed, StreamTag::kDropout);
  TrunkCache cache;
  run_trunk(cfg_, params_, batch, p_drop, p_drop > 0.0 ? &drop_rng : nullptr, cache);

  LossBreakdown out;
  out.batch = batch.size;
  Matrix d_enc;
  if (grads != nullptr) {
    d_enc = Matrix::Zero(cache.out.rows(), cfg_.hidden);
  }

  if (opts.nsp_task) {
    for (int b = 0; b < batch.size; ++b) {
      const std::int32_t y = batch.nsp_labels[static_cast<std::size_t>(b)];
      if (y != 0 && y != 1) {
        throw DataError("match label must be 0 or 1, got " + std::to_string(y));
      }
    }
    Matrix cls(batch.size, cfg_.hidden);
    for (int b = 0; b < batch.size; ++b) {
      cls.row(b) = cache.out.row(static_cast<Eigen::Index>(b) * batch.length);
    }
    const Matrix pooled =
        linear(cls, params_.view("pooler.weight"), params_.view("pooler.bias"))
            .unaryExpr([](double v) { return std::tanh(v); });
    const Matrix logits =
        linear(pooled, params_.view("nsp_head.weight"), params_.view("nsp_head.bias"));
    Matrix d_logits;
    out.nsp = softmax_cross_entropy(logits, batch.nsp_labels,
                                    1.0 / static_cast<double>(batch.size),
                                    grads != nullptr ? &d_logits : nullptr);
    if (grads != nullptr) {
      Matrix d_pooled = linear_backward(pooled, d_logits, params_.view("nsp_head.weight"),
                                        grads->view("nsp_head.weight"),
                                        grads->view("nsp_head.bias"));
      const Matrix d_pre =
          d_pooled.cwiseProduct(pooled.unaryExpr([](double v) { return 1.0 - v * v; }));
      Matrix d_cls = linear_backward(cls, d_pre, params_.view("pooler.weight"),
                                     grads->view("pooler.weight"),
                                     grads->view("pooler.bias"));
      for (int b = 0; b < batch.size; ++b) {
        d_enc.row(static_cast<Eigen::Index>(b) * batch.length) += d_cls.row(b);
      }
    }
  }

  // Token reconstruction runs only over the masked rows: unmasked positions
  // contribute neither loss nor gradient, so the dense head is never applied
  // to them during training.
  std::vector<Eigen::Index> rows;
  std::vector<std::int32_t> targets;
  if (opts.mlm_task) {
    const std::size_t total = batch.token_ids.size();
    for (std::size_t i = 0; i < total; ++i) {
      const std::int32_t label = batch.mlm_labels[i];
      if (label == EncodedInstance::kIgnoreLabel) {
        continue;
      }
      if (label < 0 || label >= cfg_.vocab_size) {
        throw DataError("reconstruction target " + std::to_string(label) +
                        " out of range");
      }
      rows.push_back(static_cast<Eigen::Index>(i));
      targets.push_back(label);
    }
  }
  out.masked_positions = static_cast<std::int64_t>(rows.size());
  if (!rows.empty()) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Matrix gathered(m, cfg_.hidden);
    for (Eigen::Index r = 0; r < m; ++r) {
      gathered.row(r) = cache.out.row(rows[static_cast<std::size_t>(r)]);
    }
    const Matrix pre = linear(gathered, params_.view("mlm_head.dense.weight"),
                              params_.view("mlm_head.dense.bias"));
    const Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
    LnCache ln;
    const Matrix hid = layer_norm(act, params_.view("mlm_head.norm.gain"),
                                  params_.view("mlm_head.norm.bias"), &ln);
    ConstMatrixMap decoder = cfg_.tie_mlm_decoder
                                 ? params_.view("embeddings.word")
                                 : params_.view("mlm_head.output.weight");
    Matrix logits = hid * decoder.transpose();
    logits.rowwise() += params_.view("mlm_head.output.bias").row(0);
    Matrix d_logits;
    out.mlm = softmax_cross_entropy(logits, targets,
                                    opts.mlm_weight / static_cast<double>(m),
                                    grads != nullptr ? &d_logits : nullptr);
    if (grads != nullptr) {
      MatrixMap d_decoder = cfg_.tie_mlm_decoder
                                ? grads->view("embeddings.word")
                                : grads->view("mlm_head.output.weight");
      d_decoder += d_logits.transpose() * hid;
      grads->view("mlm_head.output.bias").row(0) += d_logits.colwise().sum();
      const Matrix d_hid = d_logits * decoder;
      Matrix d_act = layer_norm_backward(d_hid, ln, params_.view("mlm_head.norm.gain"),
                                         grads->view("mlm_head.norm.gain"),
                                         grads->view("mlm_head.norm.bias"));
      const Matrix d_pre =
          d_act.cwiseProduct(pre.unaryExpr([](double v) { return gelu_grad(v); }));
      Matrix d_gathered = linear_backward(gathered, d_pre,
                                          params_.view("mlm_head.dense.weight"),
                                          grads->view("mlm_head.dense.weight"),
                                          grads->view("mlm_head.dense.bias"));
      for (Eigen::Index r = 0; r < m; ++r) {
        d_enc.row(rows[static_cast<std::size_t>(r)]) += d_gathered.row(r);
      }
    }
  }

  out.total = (opts.nsp_task ? out.nsp : 0.0) +
              (opts.mlm_task ? opts.mlm_weight * out.mlm : 0.0);
  if (grads != nullptr) {
    trunk_backward(cfg_, params_, batch, cache, std::move(d_enc), *grads);
  }
  return out;
}

double Model::nsp_score(const std::vector<std::string>& context, const std::string& response,
                        const Vocabulary& vocab, int max_len) const {
  check_vocab(vocab);
  const EncodedInstance inst = encode_pair(context, response, vocab, max_len, 0);
  const std::vector<double> probs = nsp_probabilities({&inst, 1});
  return probs.front();
}

std::vector<double> Model::nsp_probabilities(std::span<const EncodedInstance> instances,
                                             int batch_size) const {
  if (batch_size < 1) {
    throw ConfigError("batch_size must be positive");
  }
  std::vector<double> out;
  out.reserve(instances.size());
  for (std::size_t start = 0; start < instances.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), instances.size() - start);
    const Batch batch = Batch::from_instances(instances.subspan(start, count));
    TrunkCache cache;
    run_trunk(cfg_, params_, batch, 0.0, nullptr, cache);
    Matrix cls(batch.size, cfg_.hidden);
    for (int b = 0; b < batch.size; ++b) {
      cls.row(b) = cache.out.row(static_cast<Eigen::Index>(b) * batch.length);
    }
    const Matrix pooled =
        linear(cls, params_.view("pooler.weight"), params_.view("pooler.bias"))
            .unaryExpr([](double v) { return std::tanh(v); });
    const Matrix logits =
        linear(pooled, params_.view("nsp_head.weight"), params_.view("nsp_head.bias"));
    for (int b = 0; b < batch.size; ++b) {
      // Two-way softmax, stabilized: P(1) = 1 / (1 + exp(z0 - z1)).
      out.push_back(1.0 / (1.0 + std::exp(logits(b, 0) - logits(b, 1))));
    }
  }
  return out;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"layers", cfg.layers},
                        {"heads", cfg.heads},
                        {"hidden", cfg.hidden},
                        {"ffn_multiplier", cfg.ffn_multiplier},
                        {"vocab_size", cfg.vocab_size},
                        {"max_position", cfg.max_position},
                        {"segment_types", cfg.segment_types},
                        {"dropout", cfg.dropout},
                        {"tie_mlm_decoder", cfg.tie_mlm_decoder}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.layers = j.at("layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.ffn_multiplier = j.at("ffn_multiplier").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.max_position = j.at("max_position").get<int>();
  cfg.segment_types = j.at("segment_types").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.tie_mlm_decoder = j.at("tie_mlm_decoder").get<bool>();
  return cfg;
}

}  // namespace

void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const std::string& path) {
  model.check_vocab(vocab);

  nlohmann::json header;
  header["format"] = "drs-checkpoint";
  header["format_version"] = 1;
  header["toolkit_version"] = kVersion;
  header["dtype"] = "float64";
  header["config"] = config_to_json(model.config());
  header["tokenizer"] = {{"lowercase", vocab.tokenizer_options().lowercase},
                         {"min_frequency", vocab.min_frequency()}};
  header["vocab"] = vocab.tokens();
  header["vocab_fingerprint"] = fingerprint_hex(vocab.fingerprint());
  header["provenance"] = {{"task_mix", model.provenance().task_mix},
                          {"epochs", model.provenance().epochs},
                          {"seed", std::to_string(model.provenance().seed)}};
  nlohmann::json tensors = nlohmann::json::array();
  const ParamStore& params = model.params();
  for (int i = 0; i < params.count(); ++i) {
    const TensorInfo& t = params.info(i);
    tensors.push_back({{"name", t.name},
                       {"offset", t.offset},
                       {"rows", t.rows},
                       {"cols", t.cols}});
  }
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ConfigError("cannot open " + tmp.string() + " for writing");
    }
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(reinterpret_cast<const char*>(params.flat().data()),
              static_cast<std::streamsize>(params.flat().size() * sizeof(double)));
    if (!out) {
      throw ConfigError("failed writing checkpoint to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open checkpoint " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = std::move(buffer).str();

  constexpr std::size_t kPrefix = sizeof(kCheckpointMagic) + sizeof(std::uint64_t);
  if (bytes.size() < kPrefix ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError(path + " is not a checkpoint file");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + sizeof(kCheckpointMagic), sizeof(header_len));
  if (kPrefix + header_len > bytes.size()) {
    throw DataError(path + " is truncated: header extends past end of file");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + " has a corrupt header: " + e.what());
  }

  try {
    if (header.at("format").get<std::string>() != "drs-checkpoint") {
      throw DataError(path + " has unknown format '" +
                      header.at("format").get<std::string>() + "'");
    }
    if (header.at("format_version").get<int>() != 1) {
      throw DataError(path + " uses unsupported format version " +
                      std::to_string(header.at("format_version").get<int>()));
    }

    const ModelConfig cfg = config_from_json(header.at("config"));
    cfg.validate();

    TokenizerOptions opts;
    opts.lowercase = header.at("tokenizer").at("lowercase").get<bool>();
    const int min_frequency = header.at("tokenizer").at("min_frequency").get<int>();
    Vocabulary vocab = Vocabulary::from_tokens(
        header.at("vocab").get<std::vector<std::string>>(), opts, min_frequency);
    const std::string stored_fp = header.at("vocab_fingerprint").get<std::string>();
    if (fingerprint_hex(vocab.fingerprint()) != stored_fp) {
      throw DataError(path + ": stored vocabulary does not match its fingerprint");
    }
    if (vocab.size() != cfg.vocab_size) {
      throw DataError(path + ": vocabulary has " + std::to_string(vocab.size()) +
                      " entries but config expects " + std::to_string(cfg.vocab_size));
    }

    struct StoredTensor {
      std::int64_t offset;
      int rows;
      int cols;
    };
    std::unordered_map<std::string, StoredTensor> stored;
    for (const auto& t : header.at("tensors")) {
      stored.emplace(t.at("name").get<std::string>(),
                     StoredTensor{t.at("offset").get<std::int64_t>(),
                                  t.at("rows").get<int>(), t.at("cols").get<int>()});
    }

    Model model(cfg, /*init_seed=*/0);
    const std::size_t data_bytes = bytes.size() - kPrefix - header_len;
    const std::size_t data_count = data_bytes / sizeof(double);
    const char* data = bytes.data() + kPrefix + header_len;

    std::vector<std::string> missing;
    for (int i = 0; i < model.params().count(); ++i) {
      const TensorInfo& want = model.params().info(i);
      const auto it = stored.find(want.name);
      if (it == stored.end()) {
        missing.push_back(want.name);
        continue;
      }
      const StoredTensor& got = it->second;
      if (got.rows != want.rows || got.cols != want.cols) {
        throw DataError(path + ": tensor " + want.name + " has shape [" +
                        std::to_string(got.rows) + ", " + std::to_string(got.cols) +
                        "], expected [" + std::to_string(want.rows) + ", " +
                        std::to_string(want.cols) + "]");
      }
      if (got.offset < 0 ||
          static_cast<std::size_t>(got.offset) + static_cast<std::size_t>(want.size()) >
              data_count) {
        throw DataError(path + ": tensor " + want.name + " extends past end of data");
      }
      std::memcpy(model.params().flat().data() + want.offset,
                  data + static_cast<std::size_t>(got.offset) * sizeof(double),
                  static_cast<std::size_t>(want.size()) * sizeof(double));
      stored.erase(it);
    }
    if (!missing.empty()) {
      std::string names;
      for (const std::string& name : missing) {
        names += names.empty() ? name : ", " + name;
      }
      throw DataError(path + " is missing tensors: " + names);
    }
    if (!stored.empty()) {
      throw DataError(path + " contains unexpected tensor: " + stored.begin()->first);
    }

    const auto& prov = header.at("provenance");
    model.provenance().task_mix = prov.at("task_mix").get<std::string>();
    model.provenance().epochs = prov.at("epochs").get<int>();
    try {
      model.provenance().seed = std::stoull(prov.at("seed").get<std::string>());
    } catch (const std::logic_error&) {
      throw DataError(path + " has a malformed provenance seed");
    }
    model.tokenizer_options() = opts;
    model.bind_vocab(vocab);
    return Checkpoint{std::move(model), std::move(vocab)};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + " has an incomplete header: " + e.what());
  }
}

}  // namespace drs
