#include "drs/text.hpp"

#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utypes.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace drs {

namespace {

bool is_ascii(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool is_blank(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

std::u16string utf8_to_utf16(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  int32_t len = 0;
  u_strFromUTF8WithSub(nullptr, 0, &len, text.data(), static_cast<int32_t>(text.size()),
                       0xFFFD, nullptr, &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw std::runtime_error("utf8 decode failed");
  }
  status = U_ZERO_ERROR;
  std::u16string out(static_cast<std::size_t>(len), u'\0');
  u_strFromUTF8WithSub(out.data(), len, nullptr, text.data(),
                       static_cast<int32_t>(text.size()), 0xFFFD, nullptr, &status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("utf8 decode failed");
  }
  return out;
}

std::string utf16_to_utf8(const std::u16string& text) {
  UErrorCode status = U_ZERO_ERROR;
  int32_t len = 0;
  u_strToUTF8WithSub(nullptr, 0, &len, text.data(), static_cast<int32_t>(text.size()),
                     0xFFFD, nullptr, &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw std::runtime_error("utf8 encode failed");
  }
  status = U_ZERO_ERROR;
  std::string out(static_cast<std::size_t>(len), '\0');
  u_strToUTF8WithSub(out.data(), len, nullptr, text.data(),
                     static_cast<int32_t>(text.size()), 0xFFFD, nullptr, &status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("utf8 encode failed");
  }
  return out;
}

std::u16string nfc(const std::u16string& text) {
  UErrorCode status = U_ZERO_ERROR;
  const UNormalizer2* norm = unorm2_getNFCInstance(&status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("NFC normalizer unavailable");
  }
  int32_t len = unorm2_normalize(norm, text.data(), static_cast<int32_t>(text.size()),
                                 nullptr, 0, &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw std::runtime_error("NFC normalization failed");
  }
  status = U_ZERO_ERROR;
  std::u16string out(static_cast<std::size_t>(len), u'\0');
  unorm2_normalize(norm, text.data(), static_cast<int32_t>(text.size()), out.data(), len,
                   &status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("NFC normalization failed");
  }
  return out;
}

std::u16string to_lower_root_locale(const std::u16string& text) {
  UErrorCode status = U_ZERO_ERROR;
  int32_t len = u_strToLower(nullptr, 0, text.data(), static_cast<int32_t>(text.size()),
                             "", &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw std::runtime_error("lowercasing failed");
  }
  status = U_ZERO_ERROR;
  std::u16string out(static_cast<std::size_t>(len), u'\0');
  u_strToLower(out.data(), len, text.data(), static_cast<int32_t>(text.size()), "",
               &status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("lowercasing failed");
  }
  return out;
}

}  // namespace

std::string canonicalize_utf8(std::string_view text, bool lowercase) {
  if (is_ascii(text)) {
    std::string out(text);
    if (lowercase) {
      std::transform(out.begin(), out.end(), out.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    return out;
  }
  std::u16string wide = nfc(utf8_to_utf16(text));
  if (lowercase) {
    wide = to_lower_root_locale(wide);
  }
  return utf16_to_utf8(wide);
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts) {
  const std::string canon = canonicalize_utf8(text, opts.lowercase);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < canon.size()) {
    while (i < canon.size() && is_blank(canon[i])) {
      ++i;
    }
    const std::size_t start = i;
    while (i < canon.size() && !is_blank(canon[i])) {
      ++i;
    }
    if (i > start) {
      tokens.emplace_back(canon.substr(start, i - start));
    }
  }
  return tokens;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_blank = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
      in_blank = true;
      continue;
    }
    if (in_blank && !out.empty()) {
      out.push_back(' ');
    }
    in_blank = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace drs
