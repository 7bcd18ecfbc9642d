#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drs/corpus.hpp"

namespace drs {

/// Fixed-length model input. All four sequences share length L after
/// padding. mlm_labels holds the original token id at masked positions and
/// kIgnore everywhere else (unmasked, special, padding).
struct EncodedInstance {
  static constexpr std::int32_t kIgnoreLabel = -1;

  std::vector<std::int32_t> token_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> attention_mask;
  std::vector<std::int32_t> mlm_labels;
  int nsp_label = 0;

  int length() const { return static_cast<int>(token_ids.size()); }
  int real_token_count() const;
};

/// Trim a context/response token pair to at most `budget` tokens keeping a
/// 3:1 context:response split. A side under its quota donates the surplus to
/// the other. Context drops from the front (most recent turns survive),
/// response from the end. Never reorders.
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> truncate_pair(
    std::vector<std::int32_t> context_tokens, std::vector<std::int32_t> response_tokens,
    int budget);

/// Lay out [START] u_1 [EOT] u_2 ... u_T [SEP] response [SEP], truncate to
/// fit max_len, pad, and fill segment/attention channels. End-of-turn
/// markers sit inside the context stream, so truncation drops them together
/// with their turns.
EncodedInstance encode_pair(const std::vector<std::string>& context,
                            const std::string& response, const Vocabulary& vocab,
                            int max_len, int nsp_label);

/// Selection split applied to positions chosen for masking. The defaults are
/// the usual 80/10/10 mask/random/keep scheme; tests force 100/0/0.
struct MaskScheme {
  double mask_token_frac = 0.8;
  double random_token_frac = 0.1;
};

/// Independently select each maskable position (real, non-special) with
/// probability mask_prob, then replace per MaskScheme. Deterministic given
/// seed. The input instance is not modified.
EncodedInstance apply_mlm_mask(const EncodedInstance& instance, double mask_prob,
                               std::uint64_t seed, const Vocabulary& vocab,
                               const MaskScheme& scheme = {});

/// {"token_ids": [...], "segment_ids": [...], "attention_mask": [...],
///  "mlm_labels": [...], "nsp_label": n} — the debug dump format.
std::string to_json_string(const EncodedInstance& instance);

}  // namespace drs
