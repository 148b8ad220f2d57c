#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace factpop {

// Bad input, missing files, mismatched artifacts. The CLI maps these to
// exit code 1; anything else escaping to main is exit code 2.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a; used for manifest hashes and string-derived RNG salts.
uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t v);

// Independent stream seed from a base seed plus salt values (splitmix64 mix).
uint64_t mix_seed(uint64_t seed, std::initializer_list<uint64_t> salts);

// Uniform integer in [0, n) by rejection sampling on the raw 64-bit stream.
// std::uniform_int_distribution is implementation-defined; this is not.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t n);

// First min(k, n) positions of a seeded Fisher-Yates pass over [0, n).
std::vector<size_t> sample_indices(size_t n, size_t k, std::mt19937_64& rng);
void shuffle_indices(std::vector<size_t>& idx, std::mt19937_64& rng);

std::vector<std::string> split_tabs(const std::string& line);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Write through a temp file in the same directory, then rename into place.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& fill);
uint64_t file_fnv(const std::filesystem::path& path);

// Runs fn(0..n-1) on up to `workers` threads. All items run even if one
// throws; the first captured exception is rethrown afterwards.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn);

}  // namespace factpop
