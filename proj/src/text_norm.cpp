#include "factpop/text_norm.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace factpop {

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  return *n;
}

}  // namespace

std::string normalize_surface(std::string_view text) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString composed = nfc().normalize(u, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalize failed");
  composed.foldCase(U_FOLD_CASE_DEFAULT);

  icu::UnicodeString collapsed;
  bool pending_space = false;
  bool seen_char = false;
  for (int32_t i = 0; i < composed.length();) {
    UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = seen_char;
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    collapsed.append(c);
    seen_char = true;
  }

  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  std::string n = normalize_surface(needle);
  if (n.empty()) return false;
  std::string h = normalize_surface(haystack);
  return h.find(n) != std::string::npos;
}

std::vector<std::string> ascii_word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
      continue;
    }
    if (keep) {
      current.push_back(static_cast<char>(c));
      continue;
    }
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

}  // namespace factpop
