#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "factpop/kb_store.hpp"

namespace fixtures {

// Deterministic desk-scale world: a 200-triple KB, a 50-page dump whose
// abstracts carry entity anchors, a title map with redirects, page views,
// scripted LM rules covering generation and every evaluation mode, and a
// pipeline config wired to relative paths. write() lays the files out under
// a root directory:
//
//   kb/entities.tsv kb/relations.tsv kb/triples.tsv
//   corpus/dump.jsonl corpus/title_map.tsv
//   views/page_views.tsv
//   mocks/mock_lm.jsonl mocks/human_rewrites.jsonl
//   config.json

struct PageSpec {
  int64_t id = 0;
  std::string title;
  std::string abstract_text;            // rendered text after anchor expansion
  std::string wikitext;                 // abstract with [[...]] + sections
  std::vector<std::string> abstract_entities;  // resolved anchor targets
  std::string self_entity;              // title map hit for the title, or ""
};

// A triple that occurs in at least one page abstract, plus everything the
// scripted LM needs to know about it.
struct PlacedTriple {
  factpop::Triple triple;
  std::string subject_label;
  std::string relation_label;
  std::string relation_description;
  std::string object_label;
  std::vector<std::string> answers;  // object label + aliases, sorted
  uint64_t sr_count = 0;
  uint64_t s_count = 0;
  std::string question;       // what the scripted LM generates (or the rewrite)
  bool vanilla_correct = false;  // scripted closed-book answer is right
  bool gc_gold = false;          // generated background contains an answer
  bool human_queue = false;      // round trip never accepts
  bool roundtrip_second = false; // accepted on the second attempt
};

struct World {
  std::vector<factpop::Entity> entities;
  std::vector<factpop::Relation> relations;
  std::vector<factpop::Triple> triples;  // exactly 200
  std::vector<PageSpec> pages;           // exactly 50
  std::vector<std::pair<std::string, std::string>> title_map;  // title -> id
  std::vector<std::pair<std::string, uint64_t>> page_views;    // label -> views
  std::vector<PlacedTriple> placed;      // sorted by triple
  std::string mock_lm_jsonl;             // scripted rules, one JSON per line
  std::string human_rewrites_jsonl;

  const factpop::Entity& entity(const std::string& id) const;
  const PlacedTriple& placed_triple(const std::string& triple_id) const;

  static World create();
  void write(const std::filesystem::path& root) const;
};

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
