#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace drs {

struct TokenizerOptions {
  /// Lowercase during canonicalization. Surface forms in parsed dialogues
  /// keep their original case; lowering happens only at tokenization time.
  bool lowercase = true;

  bool operator==(const TokenizerOptions&) const = default;
};

/// NFC-normalize a UTF-8 string, optionally lowercasing (root-locale rules,
/// so the result is environment-independent). Pure-ASCII input takes a fast
/// path that never touches ICU. Invalid byte sequences are substituted with
/// U+FFFD rather than rejected.
std::string canonicalize_utf8(std::string_view text, bool lowercase);

/// Canonicalize, then split on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {});

/// Collapse internal runs of spaces/tabs to a single space and trim both
/// ends. Used on TSV fields after splitting; does not change case.
std::string normalize_whitespace(std::string_view text);

}  // namespace drs
