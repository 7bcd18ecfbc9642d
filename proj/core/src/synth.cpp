#include "drs/synth.hpp"

#include <string>

#include "drs/errors.hpp"
#include "drs/rng.hpp"
#include "drs/text.hpp"

namespace drs {
namespace {

// Derivation-path sections so train rows, validation groups, and test
// groups never share a stream.
constexpr std::uint64_t kTrainSection = 0;
constexpr std::uint64_t kValidSection = 1;
constexpr std::uint64_t kTestSection = 2;

struct TokenFamilies {
  int cues = 0;     // also the echo count; cue i pairs with echo i
  int fillers = 0;
};

TokenFamilies split_vocab(int vocab_size) {
  TokenFamilies f;
  f.cues = vocab_size / 4;
  f.fillers = vocab_size - 2 * f.cues;
  return f;
}

std::string cue_token(int i) { return "c" + std::to_string(i); }
std::string echo_token(int i) { return "e" + std::to_string(i); }
std::string filler_token(int i) { return "f" + std::to_string(i); }

void append_fillers(std::string& text, int count, const TokenFamilies& fam, Rng& rng) {
  for (int i = 0; i < count; ++i) {
    if (!text.empty()) {
      text += ' ';
    }
    text += filler_token(static_cast<int>(rng.below(static_cast<std::uint64_t>(fam.fillers))));
  }
}

/// Context turns plus the cue index each response must echo.
struct GeneratedContext {
  std::vector<std::string> turns;
  int final_cue = 0;
};

GeneratedContext make_context(const SynthSpec& spec, const TokenFamilies& fam, Rng& rng) {
  GeneratedContext ctx;
  const int span = spec.turns_max - spec.turns_min + 1;
  const int turn_count =
      spec.turns_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
  int prev_cue = -1;
  for (int t = 0; t < turn_count; ++t) {
    std::string turn;
    if (prev_cue >= 0) {
      turn = echo_token(prev_cue);
      append_fillers(turn, static_cast<int>(rng.below(3)), fam, rng);
    } else {
      append_fillers(turn, 1 + static_cast<int>(rng.below(3)), fam, rng);
    }
    const int cue = static_cast<int>(rng.below(static_cast<std::uint64_t>(fam.cues)));
    turn += ' ';
    turn += cue_token(cue);
    ctx.turns.push_back(std::move(turn));
    prev_cue = cue;
  }
  ctx.final_cue = prev_cue;
  return ctx;
}

std::string make_response(int echo, const TokenFamilies& fam, Rng& rng) {
  std::string response = echo_token(echo);
  append_fillers(response, 1 + static_cast<int>(rng.below(2)), fam, rng);
  return response;
}

int wrong_echo(int correct, const TokenFamilies& fam, Rng& rng) {
  return (correct + 1 +
          static_cast<int>(rng.below(static_cast<std::uint64_t>(fam.cues - 1)))) %
         fam.cues;
}

std::vector<Dialogue> make_groups(const SynthSpec& spec, const TokenFamilies& fam,
                                  std::uint64_t section, std::int64_t group_count) {
  std::vector<Dialogue> rows;
  rows.reserve(static_cast<std::size_t>(group_count) * spec.group_size);
  for (std::int64_t g = 0; g < group_count; ++g) {
    Rng rng = Rng::from_path(spec.seed, StreamTag::kSynth,
                             {section, static_cast<std::uint64_t>(g)});
    const GeneratedContext ctx = make_context(spec, fam, rng);
    const int positive_slot =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.group_size)));
    for (int k = 0; k < spec.group_size; ++k) {
      Dialogue row;
      row.turns = ctx.turns;
      if (k == positive_slot) {
        row.response = make_response(ctx.final_cue, fam, rng);
        row.label = 1;
      } else {
        row.response = make_response(wrong_echo(ctx.final_cue, fam, rng), fam, rng);
        row.label = 0;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

void SynthSpec::validate() const {
  if (vocab_size < 20) {
    throw ConfigError("synthetic vocabulary must have at least 20 tokens");
  }
  if (dialogues < 100) {
    throw ConfigError("synthetic corpus must have at least 100 dialogues");
  }
  if (turns_min < 1 || turns_max < turns_min) {
    throw ConfigError("turn range must satisfy 1 <= turns_min <= turns_max");
  }
  if (group_size < 2) {
    throw ConfigError("candidate groups need at least 2 candidates");
  }
  if (valid_groups < 1 || test_groups < 1) {
    throw ConfigError("validation and test need at least one group each");
  }
  const TokenFamilies fam = split_vocab(vocab_size);
  if (fam.cues < 2 || fam.fillers < 1) {
    throw ConfigError("vocabulary too small to split into cue/echo/filler families");
  }
}

SynthCorpus generate_synth(const SynthSpec& spec) {
  spec.validate();
  const TokenFamilies fam = split_vocab(spec.vocab_size);

  SynthCorpus corpus;
  corpus.train.reserve(static_cast<std::size_t>(spec.dialogues) * 2);
  for (std::int64_t i = 0; i < spec.dialogues; ++i) {
    Rng rng = Rng::from_path(spec.seed, StreamTag::kSynth,
                             {kTrainSection, static_cast<std::uint64_t>(i)});
    const GeneratedContext ctx = make_context(spec, fam, rng);
    Dialogue positive;
    positive.turns = ctx.turns;
    positive.response = make_response(ctx.final_cue, fam, rng);
    positive.label = 1;
    Dialogue negative;
    negative.turns = ctx.turns;
    negative.response = make_response(wrong_echo(ctx.final_cue, fam, rng), fam, rng);
    negative.label = 0;
    corpus.train.push_back(std::move(positive));
    corpus.train.push_back(std::move(negative));
  }
  corpus.valid = make_groups(spec, fam, kValidSection, spec.valid_groups);
  corpus.test = make_groups(spec, fam, kTestSection, spec.test_groups);
  return corpus;
}

double synth_oracle_score(const std::vector<std::string>& context,
                          const std::string& response) {
  if (context.empty()) {
    return 0.0;
  }
  const std::vector<std::string> last_turn = tokenize(context.back(), {});
  if (last_turn.empty()) {
    return 0.0;
  }
  const std::string& cue = last_turn.back();
  if (cue.size() < 2 || cue.front() != 'c') {
    return 0.0;
  }
  const std::string want = "e" + cue.substr(1);
  for (const std::string& token : tokenize(response, {})) {
    if (token == want) {
      return 1.0;
    }
  }
  return 0.0;
}

}  // namespace drs
