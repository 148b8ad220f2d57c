#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace factpop {

// Canonical surface form used for every string comparison in the toolkit:
// Unicode NFC, full case folding, whitespace runs collapsed to one space,
// leading/trailing whitespace removed.
std::string normalize_surface(std::string_view text);

// True when normalize_surface(needle) is a non-empty substring of
// normalize_surface(haystack).
bool contains_normalized(std::string_view haystack, std::string_view needle);

// ASCII-lowercased tokens split on non-alphanumeric bytes. Bytes >= 0x80 are
// kept as token characters so UTF-8 words survive intact.
std::vector<std::string> ascii_word_tokens(std::string_view text);

}  // namespace factpop
