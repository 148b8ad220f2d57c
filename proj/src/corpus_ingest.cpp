#include "factpop/corpus_ingest.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "factpop/util.hpp"
#include "json.hpp"

namespace factpop {

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (unsigned char)s[b] <= ' ') ++b;
  while (e > b && (unsigned char)s[e - 1] <= ' ') --e;
  return std::string(s.substr(b, e - b));
}

// Link target normalization: trim, underscores to spaces, fragment dropped.
std::string canonical_title(std::string_view target) {
  std::string t = trim(target);
  size_t hash = t.find('#');
  if (hash != std::string::npos) t.resize(hash);
  for (char& c : t) {
    if (c == '_') c = ' ';
  }
  return trim(t);
}

// Strips nested [[...]] markup down to its display text, without emitting
// mentions. Used for anchor surfaces that themselves contain links.
std::string flatten_markup(std::string_view s);

struct AnchorParts {
  std::string target;
  std::string surface;
};

// content is the text between [[ and ]]. The target is everything before the
// first top-level pipe; the surface is everything after it (display text), or
// the target itself when there is no pipe.
AnchorParts split_anchor(std::string_view content) {
  int depth = 0;
  size_t pipe = std::string_view::npos;
  for (size_t i = 0; i < content.size(); ++i) {
    if (content.compare(i, 2, "[[") == 0) {
      ++depth;
      ++i;
    } else if (content.compare(i, 2, "]]") == 0) {
      --depth;
      ++i;
    } else if (content[i] == '|' && depth == 0) {
      pipe = i;
      break;
    }
  }
  AnchorParts parts;
  if (pipe == std::string_view::npos) {
    parts.target = std::string(content);
    parts.surface = std::string(content);
  } else {
    parts.target = std::string(content.substr(0, pipe));
    parts.surface = flatten_markup(content.substr(pipe + 1));
  }
  return parts;
}

std::string flatten_markup(std::string_view s) {
  std::string out;
  size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 2, "[[") == 0) {
      int depth = 1;
      size_t j = i + 2;
      while (j < s.size() && depth > 0) {
        if (s.compare(j, 2, "[[") == 0) {
          ++depth;
          j += 2;
        } else if (s.compare(j, 2, "]]") == 0) {
          --depth;
          j += 2;
        } else {
          ++j;
        }
      }
      if (depth != 0) {  // unterminated, keep literally
        out.append(s.substr(i));
        break;
      }
      size_t content_end = j - 2;
      out += split_anchor(s.substr(i + 2, content_end - (i + 2))).surface;
      i = j;
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string_view abstract_of(std::string_view wikitext) {
  size_t pos = 0;
  while (pos <= wikitext.size()) {
    bool at_line_start = pos == 0 || wikitext[pos - 1] == '\n';
    if (at_line_start && wikitext.compare(pos, 2, "==") == 0) {
      return wikitext.substr(0, pos);
    }
    size_t nl = wikitext.find('\n', pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return wikitext;
}

std::string render_anchors(std::string_view abstract, const TitleMap& titles,
                           std::vector<Mention>* mentions,
                           size_t* unresolved_anchors) {
  std::string out;
  size_t i = 0;
  while (i < abstract.size()) {
    if (abstract.compare(i, 2, "[[") != 0) {
      out.push_back(abstract[i]);
      ++i;
      continue;
    }
    // Find the matching ]] of the outermost anchor.
    int depth = 1;
    size_t j = i + 2;
    while (j < abstract.size() && depth > 0) {
      if (abstract.compare(j, 2, "[[") == 0) {
        ++depth;
        j += 2;
      } else if (abstract.compare(j, 2, "]]") == 0) {
        --depth;
        j += 2;
      } else {
        ++j;
      }
    }
    if (depth != 0) {  // unterminated [[, emit literally
      out.append(abstract.substr(i));
      break;
    }
    AnchorParts parts = split_anchor(abstract.substr(i + 2, (j - 2) - (i + 2)));
    size_t begin = out.size();
    out += parts.surface;
    auto it = titles.find(canonical_title(parts.target));
    if (it != titles.end()) {
      if (mentions) {
        mentions->push_back(Mention{parts.surface, it->second, begin, out.size()});
      }
    } else if (unresolved_anchors) {
      ++*unresolved_anchors;
    }
    i = j;
  }
  return out;
}

TitleMap load_title_map(const std::filesystem::path& path) {
  TitleMap map;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected title<TAB>entity_id");
    }
    auto [it, inserted] = map.emplace(cols[0], cols[1]);
    if (!inserted && it->second != cols[1]) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": conflicting entity for title: " + cols[0]);
    }
  }
  return map;
}

IngestResult ingest_pages(const std::filesystem::path& dump_path,
                          const std::filesystem::path& title_map_path) {
  TitleMap titles = load_title_map(title_map_path);
  IngestResult result;
  std::set<int64_t> seen_pages;

  size_t lineno = 0;
  for (const std::string& line : read_lines(dump_path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("page_id") ||
        !rec.contains("title") || !rec.contains("wikitext") ||
        !rec["page_id"].is_number_integer() || !rec["title"].is_string() ||
        !rec["wikitext"].is_string()) {
      std::cerr << "warning: " << dump_path.string() << ":" << lineno
                << ": malformed page record skipped\n";
      ++result.stats.malformed_pages;
      continue;
    }

    PassageRecord passage;
    passage.page_id = rec["page_id"].get<int64_t>();
    passage.page_title = rec["title"].get<std::string>();
    if (!seen_pages.insert(passage.page_id).second) {
      std::cerr << "warning: " << dump_path.string() << ":" << lineno
                << ": duplicate page_id " << passage.page_id << " skipped\n";
      ++result.stats.duplicate_pages;
      continue;
    }

    std::string raw = trim(abstract_of(rec["wikitext"].get<std::string>()));
    auto self = titles.find(canonical_title(passage.page_title));
    if (self != titles.end()) {
      passage.self_entity = self->second;
      passage.mentions.push_back(
          Mention{passage.page_title, self->second, 0, 0});
    }
    passage.text = render_anchors(raw, titles, &passage.mentions,
                                  &result.stats.unresolved_anchors);
    result.passages.push_back(std::move(passage));
  }

  for (const PassageRecord& p : result.passages) {
    result.stats.resolved_mentions += p.mentions.size();
  }
  result.stats.pages = result.passages.size();
  return result;
}

std::vector<TripleInstance> extract_triples(
    const std::vector<PassageRecord>& passages, const KbStore& kb,
    const ExtractOptions& options) {
  std::vector<TripleInstance> out;
  for (const PassageRecord& p : passages) {
    std::set<std::string> present;
    for (const Mention& m : p.mentions) present.insert(m.entity);
    for (const std::string& subject : present) {
      if (options.subject_is_page && subject != p.self_entity) continue;
      for (const Triple& t : kb.triples_with_subject(subject)) {
        if (present.count(t.object)) out.push_back(TripleInstance{t, p.page_id});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const TripleInstance& a,
                                       const TripleInstance& b) {
    if (a.page_id != b.page_id) return a.page_id < b.page_id;
    return a.triple < b.triple;
  });
  return out;
}

void save_passages(const std::filesystem::path& path,
                   const std::vector<PassageRecord>& passages) {
  atomic_write(path, [&](std::ostream& out) {
    for (const PassageRecord& p : passages) {
      nlohmann::json rec;
      rec["page_id"] = p.page_id;
      rec["title"] = p.page_title;
      rec["text"] = p.text;
      rec["self_entity"] = p.self_entity;
      nlohmann::json mentions = nlohmann::json::array();
      for (const Mention& m : p.mentions) {
        mentions.push_back({{"surface", m.surface},
                            {"entity", m.entity},
                            {"begin", m.begin},
                            {"end", m.end}});
      }
      rec["mentions"] = std::move(mentions);
      out << rec.dump() << "\n";
    }
  });
}

std::vector<PassageRecord> load_passages(const std::filesystem::path& path) {
  std::vector<PassageRecord> passages;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid passage record");
    }
    PassageRecord p;
    p.page_id = rec.at("page_id").get<int64_t>();
    p.page_title = rec.at("title").get<std::string>();
    p.text = rec.at("text").get<std::string>();
    p.self_entity = rec.value("self_entity", std::string());
    for (const auto& m : rec.at("mentions")) {
      p.mentions.push_back(Mention{m.at("surface").get<std::string>(),
                                   m.at("entity").get<std::string>(),
                                   m.at("begin").get<size_t>(),
                                   m.at("end").get<size_t>()});
    }
    passages.push_back(std::move(p));
  }
  return passages;
}

void save_instances(const std::filesystem::path& path,
                    const std::vector<TripleInstance>& instances) {
  atomic_write(path, [&](std::ostream& out) {
    for (const TripleInstance& inst : instances) {
      out << inst.page_id << "\t" << inst.triple.subject << "\t"
          << inst.triple.relation << "\t" << inst.triple.object << "\n";
    }
  });
}

std::vector<TripleInstance> load_instances(const std::filesystem::path& path) {
  std::vector<TripleInstance> instances;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 4) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected page_id<TAB>s<TAB>r<TAB>o");
    }
    TripleInstance inst;
    try {
      inst.page_id = std::stoll(cols[0]);
    } catch (const std::exception&) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": bad page_id: " + cols[0]);
    }
    inst.triple = Triple{cols[1], cols[2], cols[3]};
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace factpop
