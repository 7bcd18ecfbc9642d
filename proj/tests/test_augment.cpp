#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <drs/augment.hpp>
#include <drs/corpus.hpp>
#include <drs/errors.hpp>
#include <drs/rng.hpp>

using drs::build_tap_set;
using drs::ContextResponsePair;
using drs::DataError;
using drs::Dialogue;
using drs::expand_dialogue;
using drs::sample_negatives;
using drs::TapSet;

namespace {

Dialogue make_dialogue(int turns, int tag, int label = 1) {
  Dialogue d;
  for (int t = 0; t < turns; ++t) {
    d.turns.push_back("d" + std::to_string(tag) + " turn " + std::to_string(t));
  }
  d.response = "d" + std::to_string(tag) + " response";
  d.label = label;
  return d;
}

std::int64_t total_turns(const std::vector<Dialogue>& rows) {
  std::int64_t sum = 0;
  for (const Dialogue& d : rows) {
    if (d.label == 1) sum += static_cast<std::int64_t>(d.turns.size());
  }
  return sum;
}

}  // namespace

TEST_CASE("a four-turn dialogue expands into exactly four pairs") {
  const Dialogue d = make_dialogue(4, 0);
  const std::vector<ContextResponsePair> pairs = expand_dialogue(d, 7);
  REQUIRE(pairs.size() == 4);

  // Three prefix pairs: context = first t turns, response = turn t+1.
  for (int t = 1; t <= 3; ++t) {
    const ContextResponsePair& p = pairs[static_cast<std::size_t>(t - 1)];
    CHECK(p.context ==
          std::vector<std::string>(d.turns.begin(), d.turns.begin() + t));
    CHECK(p.response == d.turns[static_cast<std::size_t>(t)]);
    CHECK(p.label == 1);
    CHECK(p.origin.dialogue_index == 7);
    CHECK(p.origin.prefix_len == t);
    CHECK(p.origin.negative_ordinal == 0);
  }

  // Final pair: the full context with the annotated response.
  CHECK(pairs[3].context == d.turns);
  CHECK(pairs[3].response == d.response);
  CHECK(pairs[3].origin.prefix_len == 4);
}

TEST_CASE("single-turn and two-turn dialogues expand to one and two pairs") {
  const Dialogue one = make_dialogue(1, 0);
  const auto p1 = expand_dialogue(one);
  REQUIRE(p1.size() == 1);
  CHECK(p1[0].context == one.turns);
  CHECK(p1[0].response == one.response);

  const Dialogue two = make_dialogue(2, 1);
  const auto p2 = expand_dialogue(two);
  REQUIRE(p2.size() == 2);
  CHECK(p2[0].context == std::vector<std::string>{two.turns[0]});
  CHECK(p2[0].response == two.turns[1]);
  CHECK(p2[1].context == two.turns);
  CHECK(p2[1].response == two.response);
}

TEST_CASE("expansion rejects negative dialogues and empty contexts") {
  CHECK_THROWS_AS(expand_dialogue(make_dialogue(3, 0, 0)), DataError);
  Dialogue empty;
  empty.response = "r";
  empty.label = 1;
  CHECK_THROWS_AS(expand_dialogue(empty), DataError);
}

TEST_CASE("expansion size and prefix structure hold over random dialogues") {
  drs::Rng rng(314);
  for (int i = 0; i < 200; ++i) {
    const int turns = 1 + static_cast<int>(rng.below(9));
    const Dialogue d = make_dialogue(turns, i);
    const auto pairs = expand_dialogue(d, i);
    REQUIRE(pairs.size() == static_cast<std::size_t>(turns));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& p = pairs[k];
      REQUIRE(p.context.size() == k + 1);
      // Every context is a prefix of the source turns.
      CHECK(std::equal(p.context.begin(), p.context.end(), d.turns.begin()));
      if (k + 1 < pairs.size()) {
        CHECK(p.response == d.turns[k + 1]);
      } else {
        CHECK(p.response == d.response);
      }
    }
  }
}

TEST_CASE("with one alternative in the pool the negative is forced") {
  ContextResponsePair pos;
  pos.context = {"ctx"};
  pos.response = "a";
  const std::vector<std::string> pool = {"a", "b"};
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    const auto negs = sample_negatives({pos}, pool, 1, seed);
    REQUIRE(negs.size() == 1);
    CHECK(negs[0].response == "b");
    CHECK(negs[0].context == pos.context);
    CHECK(negs[0].label == 0);
    CHECK(negs[0].origin.negative_ordinal == 1);
  }
}

TEST_CASE("a pool that only contains the positive response exhausts") {
  ContextResponsePair pos;
  pos.context = {"ctx"};
  pos.response = "a";
  CHECK_THROWS_AS(sample_negatives({pos}, {"a"}, 1, 5), DataError);
  CHECK_THROWS_AS(sample_negatives({pos}, {}, 1, 5), DataError);
}

TEST_CASE("negative sampling is deterministic in the seed") {
  std::vector<ContextResponsePair> positives;
  std::vector<std::string> pool;
  for (int i = 0; i < 20; ++i) {
    ContextResponsePair p;
    p.context = {"ctx " + std::to_string(i)};
    p.response = "resp " + std::to_string(i);
    p.origin.dialogue_index = i;
    p.origin.prefix_len = 1;
    positives.push_back(p);
    pool.push_back(p.response);
  }
  const auto a = sample_negatives(positives, pool, 3, 42);
  const auto b = sample_negatives(positives, pool, 3, 42);
  CHECK(a == b);
  const auto c = sample_negatives(positives, pool, 3, 43);
  CHECK(a != c);
  CHECK(a.size() == 60);
  for (const auto& n : a) {
    CHECK(n.label == 0);
    CHECK(n.origin.negative_ordinal >= 1);
    CHECK(n.origin.negative_ordinal <= 3);
  }
}

TEST_CASE("per-positive streams make sampling order-independent") {
  std::vector<ContextResponsePair> positives;
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) {
    ContextResponsePair p;
    p.context = {"c" + std::to_string(i)};
    p.response = "r" + std::to_string(i);
    p.origin.dialogue_index = i;
    p.origin.prefix_len = 1;
    positives.push_back(p);
    pool.push_back(p.response);
  }
  const auto forward = sample_negatives(positives, pool, 2, 7);

  std::vector<ContextResponsePair> reversed(positives.rbegin(), positives.rend());
  const auto backward = sample_negatives(reversed, pool, 2, 7);

  // Same multiset of negatives keyed by origin, independent of input order.
  auto key = [](const ContextResponsePair& p) {
    return std::make_tuple(p.origin.dialogue_index, p.origin.prefix_len,
                           p.origin.negative_ordinal, p.response);
  };
  std::multiset<std::tuple<std::int64_t, int, int, std::string>> fwd, bwd;
  for (const auto& p : forward) fwd.insert(key(p));
  for (const auto& p : backward) bwd.insert(key(p));
  CHECK(fwd == bwd);
}

TEST_CASE("one four-turn dialogue at ratio one yields eight pairs") {
  std::vector<Dialogue> corpus = {make_dialogue(4, 0)};
  // The pool needs a second response, so add another positive dialogue.
  corpus.push_back(make_dialogue(1, 1));
  const TapSet tap = build_tap_set(corpus, 1, 9);
  // Sum of turns = 4 + 1 = 5 positives, ratio 1 doubles it.
  CHECK(tap.pairs.size() == 10);
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  for (const auto& p : tap.pairs) {
    (p.label == 1 ? positives : negatives) += 1;
  }
  CHECK(positives == 5);
  CHECK(negatives == 5);
}

TEST_CASE("the size law holds: pairs = (1 + ratio) * total turns") {
  drs::Rng rng(555);
  std::vector<Dialogue> corpus;
  for (int i = 0; i < 60; ++i) {
    const int turns = 1 + static_cast<int>(rng.below(6));
    corpus.push_back(make_dialogue(turns, i, i % 4 == 0 ? 0 : 1));
  }
  const std::int64_t turn_sum = total_turns(corpus);
  for (int ratio : {0, 1, 2, 3}) {
    const TapSet tap = build_tap_set(corpus, ratio, 31);
    CHECK(tap.pairs.size() ==
          static_cast<std::size_t>((1 + ratio) * turn_sum));
  }
}

TEST_CASE("ratio zero emits only the expanded positives") {
  std::vector<Dialogue> corpus = {make_dialogue(3, 0), make_dialogue(2, 1)};
  const TapSet tap = build_tap_set(corpus, 0, 11);
  CHECK(tap.pairs.size() == 5);
  for (const auto& p : tap.pairs) CHECK(p.label == 1);
}

TEST_CASE("negative dialogues contribute responses to the pool but no pairs") {
  std::vector<Dialogue> corpus = {make_dialogue(2, 0, 1), make_dialogue(1, 1, 0)};
  const TapSet tap = build_tap_set(corpus, 0, 3);
  CHECK(tap.pairs.size() == 2);
  // The pool holds distinct responses from the whole corpus, sorted.
  CHECK(std::is_sorted(tap.response_pool.begin(), tap.response_pool.end()));
  CHECK(std::find(tap.response_pool.begin(), tap.response_pool.end(),
                  "d1 response") != tap.response_pool.end());
}

TEST_CASE("a corpus with no positive dialogues is refused") {
  std::vector<Dialogue> corpus = {make_dialogue(2, 0, 0), make_dialogue(3, 1, 0)};
  CHECK_THROWS_WITH_AS(build_tap_set(corpus, 2, 17),
                       doctest::Contains("no positive dialogues"), DataError);
}

TEST_CASE("the seed fixes the full output including shuffle order") {
  std::vector<Dialogue> corpus;
  for (int i = 0; i < 25; ++i) corpus.push_back(make_dialogue(1 + i % 4, i));
  const TapSet a = build_tap_set(corpus, 2, 1234);
  const TapSet b = build_tap_set(corpus, 2, 1234);
  CHECK(a.pairs == b.pairs);
  CHECK(a.response_pool == b.response_pool);
  const TapSet c = build_tap_set(corpus, 2, 1235);
  CHECK(a.pairs != c.pairs);
}

TEST_CASE("no sampled negative repeats its positive sibling's response") {
  std::vector<Dialogue> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(make_dialogue(1 + i % 5, i));
  const TapSet tap = build_tap_set(corpus, 3, 99);

  // Index positives by origin so each negative can find its sibling.
  std::map<std::pair<std::int64_t, int>, std::string> positive_response;
  for (const auto& p : tap.pairs) {
    if (p.label == 1) {
      positive_response[{p.origin.dialogue_index, p.origin.prefix_len}] = p.response;
    }
  }
  for (const auto& p : tap.pairs) {
    if (p.label == 0) {
      const auto it =
          positive_response.find({p.origin.dialogue_index, p.origin.prefix_len});
      REQUIRE(it != positive_response.end());
      CHECK(p.response != it->second);
      CHECK(p.context != std::vector<std::string>{});
    }
  }
}

TEST_CASE("TAP pairs serialize to TSV and load back with labels intact") {
  std::vector<Dialogue> corpus = {make_dialogue(3, 0), make_dialogue(2, 1)};
  const TapSet tap = build_tap_set(corpus, 1, 21);

  const std::string text = serialize_tap_tsv(tap.pairs);
  std::istringstream in(text);
  const drs::ParseResult parsed = drs::parse_tsv(in, true);
  REQUIRE(parsed.dialogues.size() == tap.pairs.size());
  for (std::size_t i = 0; i < tap.pairs.size(); ++i) {
    CHECK(parsed.dialogues[i].turns == tap.pairs[i].context);
    CHECK(parsed.dialogues[i].response == tap.pairs[i].response);
    CHECK(parsed.dialogues[i].label == tap.pairs[i].label);
  }

  const TapSet reloaded = drs::tap_set_from_dialogues(parsed.dialogues);
  REQUIRE(reloaded.pairs.size() == tap.pairs.size());
  for (std::size_t i = 0; i < tap.pairs.size(); ++i) {
    CHECK(reloaded.pairs[i].context == tap.pairs[i].context);
    CHECK(reloaded.pairs[i].response == tap.pairs[i].response);
    CHECK(reloaded.pairs[i].label == tap.pairs[i].label);
  }
  CHECK(std::is_sorted(reloaded.response_pool.begin(), reloaded.response_pool.end()));
}
