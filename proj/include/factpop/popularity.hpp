#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factpop/corpus_ingest.hpp"

namespace factpop {

// Corpus-frequency signals. S count = instances with the subject; S-R count =
// instances with the (subject, relation) pair. Counts use instance
// multiplicity across pages unless distinct-triple counting is requested.

struct PopularityRecord {
  uint64_t s_count = 0;
  uint64_t sr_count = 0;
  std::optional<uint64_t> page_views;
};

enum class Quadrant { HeadHead, HeadTail, TailHead, TailTail };

std::string quadrant_name(Quadrant q);

class CountIndex {
 public:
  static CountIndex build(const std::vector<TripleInstance>& instances,
                          bool distinct_triples = false);

  uint64_t s_count(const std::string& subject) const;
  uint64_t sr_count(const std::string& subject,
                    const std::string& relation) const;

  std::vector<uint64_t> all_s_counts() const;
  std::vector<uint64_t> all_sr_counts() const;
  size_t total_instances() const { return total_; }

  // counts_sr.tsv: subject <TAB> relation <TAB> sr_count
  // counts_s.tsv:  subject <TAB> s_count
  // The pair is validated on load: s_count(s) must equal sum_r sr_count(s,r).
  void save(const std::filesystem::path& sr_path,
            const std::filesystem::path& s_path) const;
  static CountIndex load(const std::filesystem::path& sr_path,
                         const std::filesystem::path& s_path);

 private:
  std::map<std::string, uint64_t> s_;
  std::map<std::pair<std::string, std::string>, uint64_t> sr_;
  size_t total_ = 0;
};

// Boundary convention: equal to the median is tail.
Quadrant classify_quadrant(const PopularityRecord& rec, uint64_t sr_median,
                           uint64_t s_median);

// Mid-rank percentile: (strictly less + half the ties) / n.
double percentile_of(uint64_t count, const std::vector<uint64_t>& population);

class PageViewClient {
 public:
  virtual ~PageViewClient() = default;
  // Absent when the client has no value for the key.
  virtual std::optional<uint64_t> views(const std::string& key) = 0;
};

// File-backed client: lines of `key <TAB> views`.
class FilePageViewClient : public PageViewClient {
 public:
  explicit FilePageViewClient(const std::filesystem::path& path);
  std::optional<uint64_t> views(const std::string& key) override;

 private:
  std::map<std::string, uint64_t> table_;
};

// Never throws; transport failures degrade to absent with a warning.
std::optional<uint64_t> fetch_page_views(const std::string& key,
                                         PageViewClient& client);

}  // namespace factpop
