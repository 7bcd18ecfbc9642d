#include "drs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "drs/errors.hpp"

namespace drs {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

/// Returns the parsed dialogue or an explanation of why the line is bad.
bool parse_line(const std::string& line, Dialogue& out, std::string& why) {
  const std::vector<std::string> fields = split_tabs(line);
  if (fields.size() < 3) {
    why = "expected at least 3 tab-separated fields, got " + std::to_string(fields.size());
    return false;
  }
  if (fields[0] == "0") {
    out.label = 0;
  } else if (fields[0] == "1") {
    out.label = 1;
  } else {
    why = "label must be 0 or 1, got \"" + fields[0] + "\"";
    return false;
  }
  out.turns.clear();
  for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
    std::string utt = normalize_whitespace(fields[i]);
    if (utt.empty()) {
      why = "utterance " + std::to_string(i) + " is empty after whitespace normalization";
      return false;
    }
    out.turns.push_back(std::move(utt));
  }
  out.response = normalize_whitespace(fields.back());
  if (out.response.empty()) {
    why = "response is empty after whitespace normalization";
    return false;
  }
  return true;
}

}  // namespace

ParseResult parse_tsv(std::istream& in, bool strict) {
  ParseResult result;
  std::string line;
  std::int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    Dialogue d;
    std::string why;
    if (parse_line(line, d, why)) {
      result.dialogues.push_back(std::move(d));
    } else if (strict) {
      throw DataError("line " + std::to_string(line_number) + ": " + why);
    } else {
      ++result.skipped_lines;
    }
  }
  return result;
}

ParseResult parse_tsv_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  return parse_tsv(in, strict);
}

void serialize_tsv(const std::vector<Dialogue>& dialogues, std::ostream& out) {
  for (const Dialogue& d : dialogues) {
    out << d.label;
    for (const std::string& turn : d.turns) {
      out << '\t' << turn;
    }
    out << '\t' << d.response << '\n';
  }
}

std::string serialize_tsv(const std::vector<Dialogue>& dialogues) {
  std::ostringstream out;
  serialize_tsv(dialogues, out);
  return out.str();
}

std::vector<CandidateGroup> group_candidates(const std::vector<Dialogue>& pairs,
                                             int group_size) {
  if (group_size < 1) {
    throw ConfigError("group_size must be >= 1");
  }
  if (pairs.size() % static_cast<std::size_t>(group_size) != 0) {
    throw DataError("row count " + std::to_string(pairs.size()) +
                    " is not divisible by group size " + std::to_string(group_size));
  }
  std::vector<CandidateGroup> groups;
  groups.reserve(pairs.size() / static_cast<std::size_t>(group_size));
  for (std::size_t base = 0; base < pairs.size(); base += static_cast<std::size_t>(group_size)) {
    CandidateGroup group;
    group.context = pairs[base].turns;
    group.candidates.reserve(static_cast<std::size_t>(group_size));
    for (std::size_t i = 0; i < static_cast<std::size_t>(group_size); ++i) {
      const Dialogue& row = pairs[base + i];
      if (row.turns != group.context) {
        throw DataError("context mismatch inside candidate block " +
                        std::to_string(base / static_cast<std::size_t>(group_size)) +
                        " at row offset " + std::to_string(i));
      }
      group.candidates.push_back({row.response, row.label});
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

CorpusStats compute_stats(const std::vector<Dialogue>& pairs) {
  if (pairs.empty()) {
    throw DataError("cannot compute statistics of an empty corpus");
  }
  CorpusStats stats;
  std::unordered_set<std::string> responses;
  std::int64_t total_turns = 0;
  for (const Dialogue& d : pairs) {
    ++stats.pair_count;
    if (d.label == 1) {
      ++stats.positive_count;
    } else {
      ++stats.negative_count;
    }
    total_turns += static_cast<std::int64_t>(d.turns.size());
    responses.insert(d.response);
  }
  stats.avg_turns = static_cast<double>(total_turns) / static_cast<double>(stats.pair_count);
  stats.distinct_response_count = static_cast<std::int64_t>(responses.size());
  return stats;
}

std::string to_json_string(const CorpusStats& stats) {
  nlohmann::json j{
      {"pair_count", stats.pair_count},
      {"positive_count", stats.positive_count},
      {"negative_count", stats.negative_count},
      {"avg_turns", stats.avg_turns},
      {"distinct_response_count", stats.distinct_response_count},
  };
  return j.dump(2);
}

const std::array<std::string_view, Vocabulary::kNumSpecial>& Vocabulary::special_tokens() {
  static const std::array<std::string_view, kNumSpecial> kTokens = {
      "[PAD]", "[UNK]", "[START]", "[SEP]", "[EOT]", "[MASK]"};
  return kTokens;
}

Vocabulary::Vocabulary(TokenizerOptions opts, int min_frequency)
    : opts_(opts), min_frequency_(min_frequency) {
  for (std::string_view tok : special_tokens()) {
    token_to_id_.emplace(std::string(tok), static_cast<int>(id_to_token_.size()));
    id_to_token_.emplace_back(tok);
  }
}

Vocabulary Vocabulary::build(const std::vector<Dialogue>& pairs, int min_frequency,
                             int max_size, TokenizerOptions opts) {
  if (min_frequency < 1) {
    throw ConfigError("min_frequency must be >= 1");
  }
  if (max_size > 0 && max_size < kNumSpecial) {
    throw ConfigError("max_size must leave room for the " +
                      std::to_string(kNumSpecial) + " special tokens");
  }
  std::unordered_map<std::string, std::int64_t> freq;
  auto count = [&](const std::string& text) {
    for (std::string& tok : drs::tokenize(text, opts)) {
      ++freq[std::move(tok)];
    }
  };
  for (const Dialogue& d : pairs) {
    for (const std::string& turn : d.turns) {
      count(turn);
    }
    count(d.response);
  }

  const auto& specials = special_tokens();
  std::vector<std::pair<std::string, std::int64_t>> kept;
  kept.reserve(freq.size());
  for (auto& [token, n] : freq) {
    if (n < min_frequency) {
      continue;
    }
    // A corpus token spelled like a special would shadow it; drop it.
    if (std::find(specials.begin(), specials.end(), token) != specials.end()) {
      continue;
    }
    kept.emplace_back(token, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) {
      return a.second > b.second;
    }
    return a.first < b.first;
  });
  if (max_size > 0 && kept.size() > static_cast<std::size_t>(max_size - kNumSpecial)) {
    kept.resize(static_cast<std::size_t>(max_size - kNumSpecial));
  }

  Vocabulary vocab(opts, min_frequency);
  for (auto& [token, n] : kept) {
    vocab.token_to_id_.emplace(token, static_cast<int>(vocab.id_to_token_.size()));
    vocab.id_to_token_.push_back(std::move(token));
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path);
  }
  for (const std::string& token : id_to_token_) {
    out << token << '\n';
  }
}

Vocabulary Vocabulary::load(const std::string& path, TokenizerOptions opts,
                            int min_frequency) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens), opts, min_frequency);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, TokenizerOptions opts,
                                   int min_frequency) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size()) {
    throw DataError("vocabulary must start with the " + std::to_string(kNumSpecial) +
                    " special tokens");
  }
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (tokens[i] != specials[i]) {
      throw DataError("vocabulary line " + std::to_string(i) + " must be " +
                      std::string(specials[i]) + ", got \"" + tokens[i] + "\"");
    }
  }
  Vocabulary vocab(opts, min_frequency);
  for (std::size_t i = specials.size(); i < tokens.size(); ++i) {
    if (tokens[i].empty()) {
      throw DataError("vocabulary line " + std::to_string(i) + " is empty");
    }
    const auto [it, inserted] =
        vocab.token_to_id_.emplace(tokens[i], static_cast<int>(vocab.id_to_token_.size()));
    if (!inserted) {
      throw DataError("duplicate vocabulary token \"" + tokens[i] + "\" at line " +
                      std::to_string(i));
    }
    vocab.id_to_token_.push_back(std::move(tokens[i]));
  }
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw ConfigError("token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::tokenize(std::string_view text) const {
  return drs::tokenize(text, opts_);
}

std::vector<std::int32_t> Vocabulary::encode_tokens(
    const std::vector<std::string>& tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    ids.push_back(static_cast<std::int32_t>(id_of(tok)));
  }
  return ids;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  auto feed = [&h](std::string_view bytes) {
    for (char c : bytes) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  };
  feed(opts_.lowercase ? "lowercase\n" : "cased\n");
  for (const std::string& token : id_to_token_) {
    feed(token);
    feed("\n");
  }
  return h;
}

}  // namespace drs
