#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace factpop {

// Knowledge base loaded from three TSV files.
//
//   entities.tsv   id \t label \t alias1|alias2|...   (alias field optional)
//   relations.tsv  id \t label \t description
//   triples.tsv    subject_id \t relation_id \t object_id
//
// Duplicate (s, r, o) rows collapse to one triple. Triples that reference an
// unknown entity or relation are dropped and counted, not fatal.

struct Entity {
  std::string id;
  std::string label;
  std::vector<std::string> aliases;  // label excluded, order preserved
};

struct Relation {
  std::string id;
  std::string label;
  std::string description;
};

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  bool operator==(const Triple& o) const {
    return subject == o.subject && relation == o.relation && object == o.object;
  }
  bool operator<(const Triple& o) const {
    if (subject != o.subject) return subject < o.subject;
    if (relation != o.relation) return relation < o.relation;
    return object < o.object;
  }
};

struct KbStats {
  size_t entities = 0;
  size_t relations = 0;
  size_t triples = 0;
  size_t dropped_triples = 0;    // dangling subject/relation/object
  size_t duplicate_triples = 0;  // repeated (s, r, o) rows
};

class KbStore {
 public:
  static KbStore load(const std::filesystem::path& entities_tsv,
                      const std::filesystem::path& relations_tsv,
                      const std::filesystem::path& triples_tsv);

  const Entity* find_entity(const std::string& id) const;
  const Relation* find_relation(const std::string& id) const;

  // label + aliases of an entity, deduplicated and sorted. Unknown id throws.
  std::vector<std::string> aliases_of(const std::string& id) const;

  // Acceptable answer strings for an object entity. Unknown id yields {}.
  std::vector<std::string> answers_for(const std::string& object_id) const;

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<Triple>& triples_with_subject(const std::string& id) const;
  const KbStats& stats() const { return stats_; }

 private:
  std::unordered_map<std::string, Entity> entities_;
  std::unordered_map<std::string, Relation> relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::vector<Triple>> by_subject_;
  KbStats stats_;
};

}  // namespace factpop
