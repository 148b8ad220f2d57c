#include "factpop/kb_store.hpp"

#include <algorithm>
#include <set>

#include "factpop/util.hpp"

namespace factpop {

namespace {

std::vector<std::string> split_aliases(const std::string& field) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= field.size()) {
    size_t bar = field.find('|', start);
    std::string piece = bar == std::string::npos
                            ? field.substr(start)
                            : field.substr(start, bar - start);
    if (!piece.empty()) out.push_back(piece);
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

[[noreturn]] void bad_row(const std::filesystem::path& path, size_t lineno,
                          const std::string& why) {
  throw UserError(path.string() + ":" + std::to_string(lineno) + ": " + why);
}

}  // namespace

KbStore KbStore::load(const std::filesystem::path& entities_tsv,
                      const std::filesystem::path& relations_tsv,
                      const std::filesystem::path& triples_tsv) {
  KbStore kb;

  size_t lineno = 0;
  for (const std::string& line : read_lines(entities_tsv)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 2 || cols.size() > 3 || cols[0].empty() || cols[1].empty()) {
      bad_row(entities_tsv, lineno, "expected id<TAB>label[<TAB>aliases]");
    }
    Entity e;
    e.id = cols[0];
    e.label = cols[1];
    if (cols.size() == 3) {
      for (auto& a : split_aliases(cols[2])) {
        if (a != e.label) e.aliases.push_back(std::move(a));
      }
    }
    if (!kb.entities_.emplace(e.id, std::move(e)).second) {
      bad_row(entities_tsv, lineno, "duplicate entity id: " + cols[0]);
    }
  }

  lineno = 0;
  for (const std::string& line : read_lines(relations_tsv)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      bad_row(relations_tsv, lineno, "expected id<TAB>label<TAB>description");
    }
    Relation r{cols[0], cols[1], cols[2]};
    if (!kb.relations_.emplace(r.id, std::move(r)).second) {
      bad_row(relations_tsv, lineno, "duplicate relation id: " + cols[0]);
    }
  }

  std::set<Triple> seen;
  lineno = 0;
  for (const std::string& line : read_lines(triples_tsv)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      bad_row(triples_tsv, lineno, "expected subject<TAB>relation<TAB>object");
    }
    Triple t{cols[0], cols[1], cols[2]};
    if (!kb.entities_.count(t.subject) || !kb.relations_.count(t.relation) ||
        !kb.entities_.count(t.object)) {
      ++kb.stats_.dropped_triples;
      continue;
    }
    if (!seen.insert(t).second) {
      ++kb.stats_.duplicate_triples;
      continue;
    }
    kb.triples_.push_back(t);
  }

  for (const Triple& t : kb.triples_) kb.by_subject_[t.subject].push_back(t);

  kb.stats_.entities = kb.entities_.size();
  kb.stats_.relations = kb.relations_.size();
  kb.stats_.triples = kb.triples_.size();
  return kb;
}

const Entity* KbStore::find_entity(const std::string& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

const Relation* KbStore::find_relation(const std::string& id) const {
  auto it = relations_.find(id);
  return it == relations_.end() ? nullptr : &it->second;
}

std::vector<std::string> KbStore::aliases_of(const std::string& id) const {
  const Entity* e = find_entity(id);
  if (!e) throw UserError("unknown entity id: " + id);
  std::set<std::string> names(e->aliases.begin(), e->aliases.end());
  names.insert(e->label);
  return {names.begin(), names.end()};
}

std::vector<std::string> KbStore::answers_for(const std::string& object_id) const {
  if (!entities_.count(object_id)) return {};
  return aliases_of(object_id);
}

const std::vector<Triple>& KbStore::triples_with_subject(
    const std::string& id) const {
  static const std::vector<Triple> kEmpty;
  auto it = by_subject_.find(id);
  return it == by_subject_.end() ? kEmpty : it->second;
}

}  // namespace factpop
