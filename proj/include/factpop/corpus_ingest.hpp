#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factpop/kb_store.hpp"

namespace factpop {

// Dump ingestion. Input is a line-delimited dump of {page_id, title, wikitext}
// records. Only the abstract (text before the first line starting with "==")
// is kept. [[Target|surface]] anchors are rendered to their surface text;
// anchors whose target resolves through the title map become entity mentions.

struct Mention {
  std::string surface;
  std::string entity;
  size_t begin = 0;  // byte span [begin, end) into PassageRecord::text
  size_t end = 0;
};

struct PassageRecord {
  int64_t page_id = 0;
  std::string page_title;
  std::string text;
  std::string self_entity;  // title map resolution of page_title, or empty
  std::vector<Mention> mentions;
};

struct TripleInstance {
  Triple triple;
  int64_t page_id = 0;

  bool operator==(const TripleInstance& o) const {
    return page_id == o.page_id && triple == o.triple;
  }
};

struct IngestStats {
  size_t pages = 0;
  size_t malformed_pages = 0;
  size_t duplicate_pages = 0;
  size_t resolved_mentions = 0;
  size_t unresolved_anchors = 0;
};

struct IngestResult {
  std::vector<PassageRecord> passages;
  IngestStats stats;
};

using TitleMap = std::unordered_map<std::string, std::string>;

TitleMap load_title_map(const std::filesystem::path& path);

IngestResult ingest_pages(const std::filesystem::path& dump_path,
                          const std::filesystem::path& title_map_path);

// Pieces of ingest_pages exposed for direct testing.
std::string_view abstract_of(std::string_view wikitext);
std::string render_anchors(std::string_view abstract, const TitleMap& titles,
                           std::vector<Mention>* mentions,
                           size_t* unresolved_anchors);

struct ExtractOptions {
  // When true only triples whose subject is the page's own entity are
  // extracted; default matches any co-occurring KB triple.
  bool subject_is_page = false;
};

// One TripleInstance per (passage, KB triple) where both endpoints are in the
// passage's mention set. Sorted by (page_id, subject, relation, object).
std::vector<TripleInstance> extract_triples(
    const std::vector<PassageRecord>& passages, const KbStore& kb,
    const ExtractOptions& options = {});

void save_passages(const std::filesystem::path& path,
                   const std::vector<PassageRecord>& passages);
std::vector<PassageRecord> load_passages(const std::filesystem::path& path);

void save_instances(const std::filesystem::path& path,
                    const std::vector<TripleInstance>& instances);
std::vector<TripleInstance> load_instances(const std::filesystem::path& path);

}  // namespace factpop
