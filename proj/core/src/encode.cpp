#include "drs/encode.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "drs/errors.hpp"
#include "drs/rng.hpp"

namespace drs {

int EncodedInstance::real_token_count() const {
  return static_cast<int>(
      std::accumulate(attention_mask.begin(), attention_mask.end(), std::int64_t{0}));
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> truncate_pair(
    std::vector<std::int32_t> context_tokens, std::vector<std::int32_t> response_tokens,
    int budget) {
  if (budget < 4) {
    throw ConfigError("truncation budget must be >= 4");
  }
  const auto ctx_len = static_cast<std::int64_t>(context_tokens.size());
  const auto resp_len = static_cast<std::int64_t>(response_tokens.size());
  if (ctx_len + resp_len <= budget) {
    return {std::move(context_tokens), std::move(response_tokens)};
  }

  std::int64_t resp_quota = budget / 4;
  std::int64_t ctx_quota = budget - resp_quota;
  // Only one side can be under quota here; the other absorbs its surplus.
  if (resp_len < resp_quota) {
    ctx_quota += resp_quota - resp_len;
    resp_quota = resp_len;
  } else if (ctx_len < ctx_quota) {
    resp_quota += ctx_quota - ctx_len;
    ctx_quota = ctx_len;
  }

  if (ctx_len > ctx_quota) {
    context_tokens.erase(context_tokens.begin(),
                         context_tokens.begin() + (ctx_len - ctx_quota));
  }
  if (resp_len > resp_quota) {
    response_tokens.resize(static_cast<std::size_t>(resp_quota));
  }
  return {std::move(context_tokens), std::move(response_tokens)};
}

EncodedInstance encode_pair(const std::vector<std::string>& context,
                            const std::string& response, const Vocabulary& vocab,
                            int max_len, int nsp_label) {
  if (max_len < 8) {
    throw ConfigError("max_len must be >= 8");
  }
  if (context.empty()) {
    throw DataError("cannot encode a pair with an empty context");
  }

  // Context stream with end-of-turn markers between consecutive turns.
  std::vector<std::int32_t> ctx_tokens;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i > 0) {
      ctx_tokens.push_back(Vocabulary::kEotId);
    }
    for (std::int32_t id : vocab.encode_tokens(vocab.tokenize(context[i]))) {
      ctx_tokens.push_back(id);
    }
  }
  if (ctx_tokens.empty()) {
    throw DataError("context produced no tokens");
  }
  std::vector<std::int32_t> resp_tokens =
      vocab.encode_tokens(vocab.tokenize(response));
  if (resp_tokens.empty()) {
    throw DataError("response produced no tokens");
  }

  // START and the two separators sit outside the truncation budget.
  auto [ctx_kept, resp_kept] =
      truncate_pair(std::move(ctx_tokens), std::move(resp_tokens), max_len - 3);

  EncodedInstance inst;
  inst.nsp_label = nsp_label;
  inst.token_ids.reserve(static_cast<std::size_t>(max_len));
  inst.token_ids.push_back(Vocabulary::kStartId);
  inst.token_ids.insert(inst.token_ids.end(), ctx_kept.begin(), ctx_kept.end());
  inst.token_ids.push_back(Vocabulary::kSepId);
  const std::size_t response_start = inst.token_ids.size();
  inst.token_ids.insert(inst.token_ids.end(), resp_kept.begin(), resp_kept.end());
  inst.token_ids.push_back(Vocabulary::kSepId);

  const std::size_t real = inst.token_ids.size();
  inst.token_ids.resize(static_cast<std::size_t>(max_len), Vocabulary::kPadId);
  inst.segment_ids.assign(static_cast<std::size_t>(max_len), 0);
  std::fill(inst.segment_ids.begin() + static_cast<std::ptrdiff_t>(response_start),
            inst.segment_ids.begin() + static_cast<std::ptrdiff_t>(real), 1);
  inst.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
  std::fill(inst.attention_mask.begin(),
            inst.attention_mask.begin() + static_cast<std::ptrdiff_t>(real), 1);
  inst.mlm_labels.assign(static_cast<std::size_t>(max_len),
                         EncodedInstance::kIgnoreLabel);
  return inst;
}

EncodedInstance apply_mlm_mask(const EncodedInstance& instance, double mask_prob,
                               std::uint64_t seed, const Vocabulary& vocab,
                               const MaskScheme& scheme) {
  if (mask_prob < 0.0 || mask_prob > 1.0) {
    throw ConfigError("mask_prob must be in [0, 1]");
  }
  if (scheme.mask_token_frac < 0.0 || scheme.random_token_frac < 0.0 ||
      scheme.mask_token_frac + scheme.random_token_frac > 1.0) {
    throw ConfigError("mask scheme fractions must be non-negative and sum to <= 1");
  }
  EncodedInstance out = instance;
  const int corpus_tokens = vocab.size() - Vocabulary::kNumSpecial;
  Rng stream = Rng::from_path(seed, StreamTag::kMasking);
  for (std::size_t pos = 0; pos < out.token_ids.size(); ++pos) {
    if (out.attention_mask[pos] == 0 || Vocabulary::is_special(out.token_ids[pos])) {
      continue;
    }
    if (stream.next_unit() >= mask_prob) {
      continue;
    }
    out.mlm_labels[pos] = out.token_ids[pos];
    const double action = stream.next_unit();
    if (action < scheme.mask_token_frac || corpus_tokens == 0) {
      out.token_ids[pos] = Vocabulary::kMaskId;
    } else if (action < scheme.mask_token_frac + scheme.random_token_frac) {
      out.token_ids[pos] = Vocabulary::kNumSpecial +
                           static_cast<std::int32_t>(stream.below(
                               static_cast<std::uint64_t>(corpus_tokens)));
    }
    // else: token kept as-is, label still set.
  }
  return out;
}

std::string to_json_string(const EncodedInstance& instance) {
  nlohmann::json j{
      {"token_ids", instance.token_ids},
      {"segment_ids", instance.segment_ids},
      {"attention_mask", instance.attention_mask},
      {"mlm_labels", instance.mlm_labels},
      {"nsp_label", instance.nsp_label},
  };
  return j.dump(2);
}

}  // namespace drs
