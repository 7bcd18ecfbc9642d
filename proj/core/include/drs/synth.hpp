#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drs/corpus.hpp"

namespace drs {

/// Size parameters for the generated benchmark stand-in. The corpus is
/// separable by construction: every utterance ends with a cue token c<i>,
/// the following utterance starts with its echo e<i>, and a correct
/// response starts with the echo of the final context turn's cue. Negative
/// responses carry a wrong echo.
struct SynthSpec {
  std::int64_t dialogues = 1000;  // labeled train pairs come out 2x this (1:1)
  int turns_min = 2;
  int turns_max = 6;
  int vocab_size = 60;  // distinct surface tokens split into cues/echoes/fillers
  std::int64_t valid_groups = 50;
  std::int64_t test_groups = 100;
  int group_size = 10;
  std::uint64_t seed = 1234;

  /// Throws ConfigError when the spec is degenerate (vocabulary < 20,
  /// dialogues < 100, bad turn range or group size).
  void validate() const;
};

struct SynthCorpus {
  std::vector<Dialogue> train;  // alternating positive/negative rows
  std::vector<Dialogue> valid;  // group_size consecutive rows per group
  std::vector<Dialogue> test;   // same layout as valid
};

/// Deterministic in the seed: every dialogue and group draws from its own
/// derived stream, so output is stable regardless of generation order.
SynthCorpus generate_synth(const SynthSpec& spec);

/// The generating rule as a scorer: 1.0 when the response contains the echo
/// matching the final context turn's trailing cue token, else 0.0. A
/// perfect ranker on generated groups.
double synth_oracle_score(const std::vector<std::string>& context,
                          const std::string& response);

}  // namespace drs
