#include <doctest.h>

#include <string>
#include <vector>

#include <drs/corpus.hpp>
#include <drs/errors.hpp>
#include <drs/eval.hpp>
#include <drs/rng.hpp>
#include <drs/synth.hpp>

using drs::aggregate_metrics;
using drs::CandidateGroup;
using drs::ConfigError;
using drs::Dialogue;
using drs::generate_synth;
using drs::group_candidates;
using drs::MetricsReport;
using drs::synth_oracle_score;
using drs::SynthCorpus;
using drs::SynthSpec;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.dialogues = 150;
  spec.turns_min = 2;
  spec.turns_max = 4;
  spec.vocab_size = 40;
  spec.valid_groups = 10;
  spec.test_groups = 20;
  spec.group_size = 10;
  spec.seed = 99;
  return spec;
}

std::vector<std::vector<double>> oracle_scores(const std::vector<CandidateGroup>& groups) {
  std::vector<std::vector<double>> scores;
  for (const CandidateGroup& g : groups) {
    std::vector<double> s;
    for (const auto& cand : g.candidates) {
      s.push_back(synth_oracle_score(g.context, cand.response));
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

}  // namespace

TEST_CASE("degenerate generator parameters are rejected") {
  SynthSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  SynthSpec bad = spec;
  bad.vocab_size = 19;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.dialogues = 99;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.turns_min = 3;
  bad.turns_max = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.group_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.valid_groups = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generation is deterministic in the seed") {
  const SynthCorpus a = generate_synth(small_spec());
  const SynthCorpus b = generate_synth(small_spec());
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);

  SynthSpec other = small_spec();
  other.seed = 100;
  const SynthCorpus c = generate_synth(other);
  CHECK(a.train != c.train);
}

TEST_CASE("training rows alternate positive and negative over shared contexts") {
  const SynthCorpus corpus = generate_synth(small_spec());
  REQUIRE(corpus.train.size() == 300);
  for (std::size_t i = 0; i < corpus.train.size(); i += 2) {
    const Dialogue& pos = corpus.train[i];
    const Dialogue& neg = corpus.train[i + 1];
    CHECK(pos.label == 1);
    CHECK(neg.label == 0);
    CHECK(pos.turns == neg.turns);
    CHECK(pos.response != neg.response);
  }
}

TEST_CASE("turn counts respect the configured range") {
  const SynthSpec spec = small_spec();
  const SynthCorpus corpus = generate_synth(spec);
  for (const Dialogue& d : corpus.train) {
    CHECK(d.turns.size() >= static_cast<std::size_t>(spec.turns_min));
    CHECK(d.turns.size() <= static_cast<std::size_t>(spec.turns_max));
  }
}

TEST_CASE("the cue/echo chain links consecutive turns") {
  const SynthCorpus corpus = generate_synth(small_spec());
  const drs::Vocabulary splitter;  // default tokenizer
  for (std::size_t i = 0; i < 20; ++i) {
    const Dialogue& d = corpus.train[i * 2];
    std::string prev_cue;
    for (const std::string& turn : d.turns) {
      const std::vector<std::string> tokens = splitter.tokenize(turn);
      REQUIRE_FALSE(tokens.empty());
      // Every turn ends with a cue token.
      CHECK(tokens.back().front() == 'c');
      if (!prev_cue.empty()) {
        // ...and opens with the echo of the previous turn's cue.
        CHECK(tokens.front() == "e" + prev_cue.substr(1));
      }
      prev_cue = tokens.back();
    }
    // The positive response echoes the final cue.
    CHECK(synth_oracle_score(d.turns, d.response) == 1.0);
  }
}

TEST_CASE("validation and test rows form aligned groups with one positive") {
  const SynthSpec spec = small_spec();
  const SynthCorpus corpus = generate_synth(spec);
  REQUIRE(corpus.valid.size() ==
          static_cast<std::size_t>(spec.valid_groups * spec.group_size));
  REQUIRE(corpus.test.size() ==
          static_cast<std::size_t>(spec.test_groups * spec.group_size));

  for (const auto* rows : {&corpus.valid, &corpus.test}) {
    const std::vector<CandidateGroup> groups = group_candidates(*rows, spec.group_size);
    for (const CandidateGroup& g : groups) {
      int positives = 0;
      for (const auto& cand : g.candidates) positives += cand.label;
      CHECK(positives == 1);
    }
  }
}

TEST_CASE("the generating rule ranks its own groups perfectly") {
  const SynthSpec spec = small_spec();
  const SynthCorpus corpus = generate_synth(spec);
  const std::vector<CandidateGroup> groups =
      group_candidates(corpus.test, spec.group_size);
  const MetricsReport report = aggregate_metrics(groups, oracle_scores(groups));
  CHECK(report.r_at_1 == 1.0);
  CHECK(report.p_at_1 == 1.0);
  CHECK(report.map == 1.0);
  CHECK(report.mrr == 1.0);
  CHECK(report.skipped_groups == 0);
}

TEST_CASE("oracle scores are exactly zero or one, never in between") {
  const SynthCorpus corpus = generate_synth(small_spec());
  for (std::size_t i = 0; i < 40; ++i) {
    const Dialogue& d = corpus.train[i];
    const double score = synth_oracle_score(d.turns, d.response);
    CHECK((score == 0.0 || score == 1.0));
    CHECK(score == (d.label == 1 ? 1.0 : 0.0));
  }
  CHECK(synth_oracle_score({}, "e0 whatever") == 0.0);
  CHECK(synth_oracle_score({"no cue here"}, "e0") == 0.0);
}

TEST_CASE("a random scorer on the generated groups lands near chance") {
  SynthSpec spec = small_spec();
  spec.test_groups = 200;
  const SynthCorpus corpus = generate_synth(spec);
  const std::vector<CandidateGroup> groups =
      group_candidates(corpus.test, spec.group_size);

  drs::Rng rng(5150);
  std::vector<std::vector<double>> scores;
  for (const CandidateGroup& g : groups) {
    std::vector<double> s;
    for (std::size_t c = 0; c < g.candidates.size(); ++c) s.push_back(rng.next_unit());
    scores.push_back(std::move(s));
  }
  const MetricsReport report = aggregate_metrics(groups, scores);
  // Chance is 0.1 for 10 candidates; 200 groups leave sampling room.
  CHECK(report.r_at_1 >= 0.03);
  CHECK(report.r_at_1 <= 0.17);
}
