#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drs/text.hpp"

namespace drs {

/// One labeled context/response pair: a multi-turn context, a candidate
/// response, and whether the candidate actually follows the context.
struct Dialogue {
  std::vector<std::string> turns;
  std::string response;
  int label = 0;

  bool operator==(const Dialogue&) const = default;
};

struct Candidate {
  std::string response;
  int label = 0;

  bool operator==(const Candidate&) const = default;
};

/// One context with its candidate set, in file order. The unit over which
/// ranking metrics are computed.
struct CandidateGroup {
  std::vector<std::string> context;
  std::vector<Candidate> candidates;
};

struct CorpusStats {
  std::int64_t pair_count = 0;
  std::int64_t positive_count = 0;
  std::int64_t negative_count = 0;
  double avg_turns = 0.0;
  std::int64_t distinct_response_count = 0;
};

struct ParseResult {
  std::vector<Dialogue> dialogues;
  std::int64_t skipped_lines = 0;
};

/// Parse the label-TAB-utterances-TAB-response format, one pair per line.
/// Utterances are whitespace-normalized after field splitting. In strict
/// mode a malformed line raises DataError naming the 1-based line number;
/// in lenient mode malformed lines are skipped and counted.
ParseResult parse_tsv(std::istream& in, bool strict);
ParseResult parse_tsv_file(const std::string& path, bool strict);

/// Inverse of parse_tsv on well-formed dialogues.
void serialize_tsv(const std::vector<Dialogue>& dialogues, std::ostream& out);
std::string serialize_tsv(const std::vector<Dialogue>& dialogues);

/// Cut a flat row list into consecutive candidate groups of group_size.
/// All rows inside a block must share the identical context.
std::vector<CandidateGroup> group_candidates(const std::vector<Dialogue>& pairs,
                                             int group_size);

CorpusStats compute_stats(const std::vector<Dialogue>& pairs);
std::string to_json_string(const CorpusStats& stats);

/// Token-to-id bijection with six reserved special tokens at the lowest
/// ids. Carries the tokenizer options it was built with so every consumer
/// splits text the same way.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kStartId = 2;
  static constexpr int kSepId = 3;
  static constexpr int kEotId = 4;
  static constexpr int kMaskId = 5;
  static constexpr int kNumSpecial = 6;

  static const std::array<std::string_view, kNumSpecial>& special_tokens();
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  /// Specials-only vocabulary.
  explicit Vocabulary(TokenizerOptions opts = {}, int min_frequency = 1);

  /// Whitespace-token vocabulary over all turns and responses. Tokens seen
  /// fewer than min_frequency times are dropped; if the result would exceed
  /// max_size (total, specials included), the highest-frequency tokens win,
  /// ties broken lexicographically. max_size <= 0 means unlimited.
  static Vocabulary build(const std::vector<Dialogue>& pairs, int min_frequency,
                          int max_size, TokenizerOptions opts = {});

  /// One token per line, line number == id, specials first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path, TokenizerOptions opts = {},
                         int min_frequency = 1);
  static Vocabulary from_tokens(std::vector<std::string> tokens, TokenizerOptions opts = {},
                                int min_frequency = 1);

  int id_of(const std::string& token) const;  // kUnkId when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<std::string> tokenize(std::string_view text) const;
  std::vector<std::int32_t> encode_tokens(const std::vector<std::string>& tokens) const;

  /// FNV-1a over the serialized token list plus tokenizer options; changes
  /// whenever encoding behavior would change.
  std::uint64_t fingerprint() const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }
  const TokenizerOptions& tokenizer_options() const { return opts_; }
  int min_frequency() const { return min_frequency_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  TokenizerOptions opts_;
  int min_frequency_ = 1;
};

}  // namespace drs
