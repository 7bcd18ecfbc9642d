#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drs/corpus.hpp"

namespace drs {

/// Identifies where a pre-training pair came from: the source dialogue, the
/// context prefix length, and which sampled negative it is (0 marks the
/// positive itself, 1..ratio its negatives).
struct PairOrigin {
  std::int64_t dialogue_index = 0;
  int prefix_len = 0;
  int negative_ordinal = 0;

  bool operator==(const PairOrigin&) const = default;
};

struct ContextResponsePair {
  std::vector<std::string> context;
  std::string response;
  int label = 1;
  PairOrigin origin;

  bool operator==(const ContextResponsePair&) const = default;
};

/// Expand one positive dialogue with T turns into exactly T pairs: every
/// (strict context prefix, next utterance) pair plus the original
/// (full context, response) pair. All outputs carry label 1.
std::vector<ContextResponsePair> expand_dialogue(const Dialogue& d,
                                                 std::int64_t dialogue_index = 0);

/// For each positive emit `ratio` same-context negatives whose responses are
/// drawn uniformly from response_pool, rejecting the positive's own response
/// (up to 100 attempts, then DataError). Each positive uses an independent
/// RNG stream derived from (seed, origin), so results do not depend on
/// processing order.
std::vector<ContextResponsePair> sample_negatives(
    const std::vector<ContextResponsePair>& positives,
    const std::vector<std::string>& response_pool, int ratio, std::uint64_t seed);

struct TapSet {
  std::vector<ContextResponsePair> pairs;
  /// Distinct candidate responses available for negative sampling, sorted.
  std::vector<std::string> response_pool;
};

/// Full pre-training set construction: expand every positive dialogue, pool
/// candidate responses, attach `ratio` negatives per positive (ratio 0 skips
/// sampling entirely), and shuffle deterministically by seed.
TapSet build_tap_set(const std::vector<Dialogue>& corpus, int ratio, std::uint64_t seed);

/// Pre-training pairs serialize in the same TSV format as the corpus, so the
/// pipeline composes through files.
void serialize_tap_tsv(const std::vector<ContextResponsePair>& pairs, std::ostream& out);
std::string serialize_tap_tsv(const std::vector<ContextResponsePair>& pairs);

/// Rebuild a TapSet from dialogues parsed out of a TAP TSV file. Origins are
/// assigned from row order; the response pool is rebuilt from the distinct
/// positive responses.
TapSet tap_set_from_dialogues(const std::vector<Dialogue>& rows);

}  // namespace drs
