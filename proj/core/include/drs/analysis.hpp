#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "drs/corpus.hpp"

namespace drs {

/// Exact mode stores each distinct n-gram as a joined string; hashed mode
/// stores a 64-bit hash per n-gram, trading exactness for memory on large
/// corpora. With m distinct n-grams the expected number of false collisions
/// in hashed mode is about m^2 / 2^65.
enum class NgramMode { kExact, kHashed };

struct NgramSet {
  int n = 0;
  NgramMode mode = NgramMode::kExact;
  std::unordered_set<std::string> exact;
  std::unordered_set<std::uint64_t> hashed;

  std::int64_t size() const {
    return static_cast<std::int64_t>(mode == NgramMode::kExact ? exact.size()
                                                               : hashed.size());
  }
};

/// |a intersect b|; both sets must have the same n and mode.
std::int64_t shared_ngrams(const NgramSet& a, const NgramSet& b);

/// Distinct n-grams over all utterances (turns and responses) of a corpus.
/// N-grams never cross an utterance boundary; utterances shorter than n
/// contribute nothing. Tokenization follows the given options.
NgramSet extract_ngrams(const std::vector<Dialogue>& dialogues, int n,
                        NgramMode mode = NgramMode::kExact,
                        const TokenizerOptions& opts = {});

struct NgramReport {
  int n = 0;
  std::int64_t train_distinct = 0;
  std::int64_t test_distinct = 0;
  std::int64_t shared = 0;
  double overlap_percent = 0.0;  // rounded to two decimals
};

/// Share of the test corpus's distinct n-grams that also occur in the
/// training corpus: 100 * |test intersect train| / |test|, to two decimals.
/// Throws DataError when the test corpus yields zero n-grams.
NgramReport overlap_report(const std::vector<Dialogue>& train,
                           const std::vector<Dialogue>& test, int n,
                           NgramMode mode = NgramMode::kExact,
                           const TokenizerOptions& opts = {});

std::string to_json_string(const NgramReport& report);

}  // namespace drs
