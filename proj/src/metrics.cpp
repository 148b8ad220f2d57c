#include "factpop/metrics.hpp"

#include <algorithm>

#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"

namespace factpop {

bool substring_em(const std::string& prediction,
                  const std::vector<std::string>& acceptable_answers) {
  for (const std::string& answer : acceptable_answers) {
    if (contains_normalized(prediction, answer)) return true;
  }
  return false;
}

bool passage_hit(const std::string& context,
                 const std::vector<std::string>& acceptable_answers) {
  return substring_em(context, acceptable_answers);
}

uint64_t lower_median(std::vector<uint64_t> values) {
  if (values.empty()) throw UserError("median of empty list");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace factpop
