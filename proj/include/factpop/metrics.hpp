#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace factpop {

// Substring exact match: 1 when any acceptable answer, surface-normalized, is
// a substring of the normalized prediction field. Empty answers are skipped.
bool substring_em(const std::string& prediction,
                  const std::vector<std::string>& acceptable_answers);

// Passage accuracy: any acceptable answer appears in the retrieved context.
bool passage_hit(const std::string& context,
                 const std::vector<std::string>& acceptable_answers);

// Lower median: sorted value at index (n-1)/2. Error on empty input.
uint64_t lower_median(std::vector<uint64_t> values);

}  // namespace factpop
