#include "factpop/popularity.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "factpop/util.hpp"

namespace factpop {

std::string quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::HeadHead: return "head-head";
    case Quadrant::HeadTail: return "head-tail";
    case Quadrant::TailHead: return "tail-head";
    case Quadrant::TailTail: return "tail-tail";
  }
  throw std::logic_error("bad quadrant");
}

CountIndex CountIndex::build(const std::vector<TripleInstance>& instances,
                             bool distinct_triples) {
  CountIndex idx;
  if (distinct_triples) {
    std::set<Triple> seen;
    for (const TripleInstance& inst : instances) {
      if (!seen.insert(inst.triple).second) continue;
      ++idx.s_[inst.triple.subject];
      ++idx.sr_[{inst.triple.subject, inst.triple.relation}];
      ++idx.total_;
    }
  } else {
    for (const TripleInstance& inst : instances) {
      ++idx.s_[inst.triple.subject];
      ++idx.sr_[{inst.triple.subject, inst.triple.relation}];
      ++idx.total_;
    }
  }
  return idx;
}

uint64_t CountIndex::s_count(const std::string& subject) const {
  auto it = s_.find(subject);
  return it == s_.end() ? 0 : it->second;
}

uint64_t CountIndex::sr_count(const std::string& subject,
                              const std::string& relation) const {
  auto it = sr_.find({subject, relation});
  return it == sr_.end() ? 0 : it->second;
}

std::vector<uint64_t> CountIndex::all_s_counts() const {
  std::vector<uint64_t> out;
  out.reserve(s_.size());
  for (const auto& [k, v] : s_) out.push_back(v);
  return out;
}

std::vector<uint64_t> CountIndex::all_sr_counts() const {
  std::vector<uint64_t> out;
  out.reserve(sr_.size());
  for (const auto& [k, v] : sr_) out.push_back(v);
  return out;
}

void CountIndex::save(const std::filesystem::path& sr_path,
                      const std::filesystem::path& s_path) const {
  atomic_write(sr_path, [&](std::ostream& out) {
    for (const auto& [key, count] : sr_) {
      out << key.first << "\t" << key.second << "\t" << count << "\n";
    }
  });
  atomic_write(s_path, [&](std::ostream& out) {
    for (const auto& [subject, count] : s_) {
      out << subject << "\t" << count << "\n";
    }
  });
}

namespace {

uint64_t parse_count(const std::filesystem::path& path, size_t lineno,
                     const std::string& field) {
  try {
    size_t used = 0;
    long long v = std::stoll(field, &used);
    if (used != field.size() || v < 0) throw std::invalid_argument(field);
    return static_cast<uint64_t>(v);
  } catch (const std::exception&) {
    throw UserError(path.string() + ":" + std::to_string(lineno) +
                    ": bad count: " + field);
  }
}

}  // namespace

CountIndex CountIndex::load(const std::filesystem::path& sr_path,
                            const std::filesystem::path& s_path) {
  CountIndex idx;
  size_t lineno = 0;
  for (const std::string& line : read_lines(sr_path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3) {
      throw UserError(sr_path.string() + ":" + std::to_string(lineno) +
                      ": expected subject<TAB>relation<TAB>count");
    }
    uint64_t count = parse_count(sr_path, lineno, cols[2]);
    if (!idx.sr_.emplace(std::make_pair(cols[0], cols[1]), count).second) {
      throw UserError(sr_path.string() + ":" + std::to_string(lineno) +
                      ": duplicate pair " + cols[0] + "," + cols[1]);
    }
    idx.total_ += count;
  }
  lineno = 0;
  for (const std::string& line : read_lines(s_path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw UserError(s_path.string() + ":" + std::to_string(lineno) +
                      ": expected subject<TAB>count");
    }
    uint64_t count = parse_count(s_path, lineno, cols[1]);
    if (!idx.s_.emplace(cols[0], count).second) {
      throw UserError(s_path.string() + ":" + std::to_string(lineno) +
                      ": duplicate subject " + cols[0]);
    }
  }
  // The two files must describe the same tally.
  std::map<std::string, uint64_t> from_pairs;
  for (const auto& [key, count] : idx.sr_) from_pairs[key.first] += count;
  if (from_pairs != idx.s_) {
    throw UserError("count files disagree: " + s_path.string() +
                    " does not match per-relation sums in " + sr_path.string());
  }
  return idx;
}

Quadrant classify_quadrant(const PopularityRecord& rec, uint64_t sr_median,
                           uint64_t s_median) {
  bool sr_head = rec.sr_count > sr_median;
  bool s_head = rec.s_count > s_median;
  if (sr_head && s_head) return Quadrant::HeadHead;
  if (sr_head) return Quadrant::HeadTail;
  if (s_head) return Quadrant::TailHead;
  return Quadrant::TailTail;
}

double percentile_of(uint64_t count, const std::vector<uint64_t>& population) {
  if (population.empty()) throw UserError("percentile_of: empty population");
  size_t less = 0, ties = 0;
  for (uint64_t v : population) {
    if (v < count) ++less;
    else if (v == count) ++ties;
  }
  return (static_cast<double>(less) + 0.5 * static_cast<double>(ties)) /
         static_cast<double>(population.size());
}

FilePageViewClient::FilePageViewClient(const std::filesystem::path& path) {
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected key<TAB>views");
    }
    table_[cols[0]] = parse_count(path, lineno, cols[1]);
  }
}

std::optional<uint64_t> FilePageViewClient::views(const std::string& key) {
  auto it = table_.find(key);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::optional<uint64_t> fetch_page_views(const std::string& key,
                                         PageViewClient& client) {
  try {
    return client.views(key);
  } catch (const std::exception& e) {
    std::cerr << "warning: page view lookup failed for '" << key
              << "': " << e.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace factpop
