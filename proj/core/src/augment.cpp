#include "drs/augment.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

#include "drs/errors.hpp"
#include "drs/rng.hpp"

namespace drs {

std::vector<ContextResponsePair> expand_dialogue(const Dialogue& d,
                                                 std::int64_t dialogue_index) {
  if (d.label != 1) {
    throw DataError("only positive dialogues expand; dialogue " +
                    std::to_string(dialogue_index) + " has label " +
                    std::to_string(d.label));
  }
  if (d.turns.empty()) {
    // Without at least one turn the original (context, response) pair would
    // have an empty context, and the T-pair output law cannot hold.
    throw DataError("dialogue " + std::to_string(dialogue_index) + " has no turns");
  }
  const int turns = static_cast<int>(d.turns.size());
  std::vector<ContextResponsePair> pairs;
  pairs.reserve(static_cast<std::size_t>(turns));
  for (int t = 1; t < turns; ++t) {
    ContextResponsePair pair;
    pair.context.assign(d.turns.begin(), d.turns.begin() + t);
    pair.response = d.turns[static_cast<std::size_t>(t)];
    pair.label = 1;
    pair.origin = {dialogue_index, t, 0};
    pairs.push_back(std::move(pair));
  }
  ContextResponsePair original;
  original.context = d.turns;
  original.response = d.response;
  original.label = 1;
  original.origin = {dialogue_index, turns, 0};
  pairs.push_back(std::move(original));
  return pairs;
}

std::vector<ContextResponsePair> sample_negatives(
    const std::vector<ContextResponsePair>& positives,
    const std::vector<std::string>& response_pool, int ratio, std::uint64_t seed) {
  if (ratio < 1) {
    throw ConfigError("negative sampling ratio must be >= 1");
  }
  if (response_pool.size() < 2) {
    throw DataError("response pool needs at least 2 entries, got " +
                    std::to_string(response_pool.size()));
  }
  std::vector<ContextResponsePair> negatives;
  negatives.reserve(positives.size() * static_cast<std::size_t>(ratio));
  for (const ContextResponsePair& pos : positives) {
    Rng stream = Rng::from_path(seed, StreamTag::kNegativeSampling,
                                {static_cast<std::uint64_t>(pos.origin.dialogue_index),
                                 static_cast<std::uint64_t>(pos.origin.prefix_len)});
    for (int k = 1; k <= ratio; ++k) {
      const std::string* drawn = nullptr;
      for (int attempt = 0; attempt < 100; ++attempt) {
        const std::string& candidate =
            response_pool[stream.below(response_pool.size())];
        if (candidate != pos.response) {
          drawn = &candidate;
          break;
        }
      }
      if (drawn == nullptr) {
        throw DataError("negative sampling exhausted 100 attempts; response pool is "
                        "degenerate");
      }
      ContextResponsePair neg;
      neg.context = pos.context;
      neg.response = *drawn;
      neg.label = 0;
      neg.origin = {pos.origin.dialogue_index, pos.origin.prefix_len, k};
      negatives.push_back(std::move(neg));
    }
  }
  return negatives;
}

TapSet build_tap_set(const std::vector<Dialogue>& corpus, int ratio, std::uint64_t seed) {
  if (corpus.empty()) {
    throw DataError("cannot build a pre-training set from an empty corpus");
  }
  if (ratio < 0) {
    throw ConfigError("negative sampling ratio must be >= 0");
  }

  TapSet tap;
  std::set<std::string> pool;
  bool any_positive = false;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Dialogue& d = corpus[i];
    pool.insert(d.response);
    if (d.label != 1) {
      continue;
    }
    any_positive = true;
    for (ContextResponsePair& pair :
         expand_dialogue(d, static_cast<std::int64_t>(i))) {
      pool.insert(pair.response);
      tap.pairs.push_back(std::move(pair));
    }
  }
  if (!any_positive) {
    throw DataError("corpus has no positive dialogues to expand");
  }
  tap.response_pool.assign(pool.begin(), pool.end());

  if (ratio >= 1) {
    std::vector<ContextResponsePair> negatives =
        sample_negatives(tap.pairs, tap.response_pool, ratio, seed);
    tap.pairs.insert(tap.pairs.end(), std::make_move_iterator(negatives.begin()),
                     std::make_move_iterator(negatives.end()));
  }

  Rng shuffle_stream = Rng::from_path(seed, StreamTag::kTapShuffle);
  shuffle_stream.shuffle(tap.pairs);
  return tap;
}

void serialize_tap_tsv(const std::vector<ContextResponsePair>& pairs, std::ostream& out) {
  for (const ContextResponsePair& pair : pairs) {
    out << pair.label;
    for (const std::string& turn : pair.context) {
      out << '\t' << turn;
    }
    out << '\t' << pair.response << '\n';
  }
}

std::string serialize_tap_tsv(const std::vector<ContextResponsePair>& pairs) {
  std::ostringstream out;
  serialize_tap_tsv(pairs, out);
  return out.str();
}

TapSet tap_set_from_dialogues(const std::vector<Dialogue>& rows) {
  TapSet tap;
  tap.pairs.reserve(rows.size());
  std::set<std::string> pool;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Dialogue& row = rows[i];
    ContextResponsePair pair;
    pair.context = row.turns;
    pair.response = row.response;
    pair.label = row.label;
    pair.origin = {static_cast<std::int64_t>(i), static_cast<int>(row.turns.size()),
                   row.label == 1 ? 0 : 1};
    if (row.label == 1) {
      pool.insert(row.response);
    }
    tap.pairs.push_back(std::move(pair));
  }
  tap.response_pool.assign(pool.begin(), pool.end());
  return tap;
}

}  // namespace drs
