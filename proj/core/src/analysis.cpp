#include "drs/analysis.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "drs/errors.hpp"

namespace drs {
namespace {

// Unit separator: cannot appear inside whitespace-split tokens, so joined
// n-grams collide only when their token sequences are identical.
constexpr char kTokenJoin = '\x1f';

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void add_utterance_ngrams(const std::string& utterance, int n,
                          const TokenizerOptions& opts, NgramSet& set) {
  const std::vector<std::string> tokens = tokenize(utterance, opts);
  if (static_cast<int>(tokens.size()) < n) {
    return;
  }
  for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= tokens.size();
       ++start) {
    std::string key = tokens[start];
    for (int j = 1; j < n; ++j) {
      key += kTokenJoin;
      key += tokens[start + static_cast<std::size_t>(j)];
    }
    if (set.mode == NgramMode::kExact) {
      set.exact.insert(std::move(key));
    } else {
      set.hashed.insert(fnv1a(key));
    }
  }
}

}  // namespace

NgramSet extract_ngrams(const std::vector<Dialogue>& dialogues, int n, NgramMode mode,
                        const TokenizerOptions& opts) {
  if (n < 1) {
    throw ConfigError("n-gram order must be at least 1");
  }
  NgramSet set;
  set.n = n;
  set.mode = mode;
  for (const Dialogue& d : dialogues) {
    for (const std::string& turn : d.turns) {
      add_utterance_ngrams(turn, n, opts, set);
    }
    add_utterance_ngrams(d.response, n, opts, set);
  }
  return set;
}

std::int64_t shared_ngrams(const NgramSet& a, const NgramSet& b) {
  if (a.n != b.n || a.mode != b.mode) {
    throw ConfigError("cannot intersect n-gram sets of different order or mode");
  }
  std::int64_t shared = 0;
  if (a.mode == NgramMode::kExact) {
    const auto& small = a.exact.size() <= b.exact.size() ? a.exact : b.exact;
    const auto& large = a.exact.size() <= b.exact.size() ? b.exact : a.exact;
    for (const std::string& key : small) {
      shared += large.contains(key) ? 1 : 0;
    }
  } else {
    const auto& small = a.hashed.size() <= b.hashed.size() ? a.hashed : b.hashed;
    const auto& large = a.hashed.size() <= b.hashed.size() ? b.hashed : a.hashed;
    for (const std::uint64_t key : small) {
      shared += large.contains(key) ? 1 : 0;
    }
  }
  return shared;
}

NgramReport overlap_report(const std::vector<Dialogue>& train,
                           const std::vector<Dialogue>& test, int n, NgramMode mode,
                           const TokenizerOptions& opts) {
  if (train.empty() || test.empty()) {
    throw DataError("both corpora must be non-empty");
  }
  const NgramSet train_set = extract_ngrams(train, n, mode, opts);
  const NgramSet test_set = extract_ngrams(test, n, mode, opts);
  if (test_set.size() == 0) {
    throw DataError("the test corpus yields no " + std::to_string(n) + "-grams");
  }

  NgramReport report;
  report.n = n;
  report.train_distinct = train_set.size();
  report.test_distinct = test_set.size();
  report.shared = shared_ngrams(train_set, test_set);
  const double raw = 100.0 * static_cast<double>(report.shared) /
                     static_cast<double>(report.test_distinct);
  report.overlap_percent = std::round(raw * 100.0) / 100.0;
  return report;
}

std::string to_json_string(const NgramReport& report) {
  const nlohmann::json j{{"n", report.n},
                         {"train_distinct", report.train_distinct},
                         {"test_distinct", report.test_distinct},
                         {"shared", report.shared},
                         {"overlap_percent", report.overlap_percent}};
  return j.dump(2);
}

}  // namespace drs
