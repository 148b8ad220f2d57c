#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "factpop/dataset_builder.hpp"
#include "factpop/metrics.hpp"
#include "factpop/prompts.hpp"
#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"
#include "json.hpp"

namespace fixtures {

using factpop::Entity;
using factpop::Relation;
using factpop::Triple;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& why) {
  throw std::logic_error("fixture invariant violated: " + why);
}

void require(bool ok, const std::string& why) {
  if (!ok) fail(why);
}

// Anchor target as the title map sees it: underscores to spaces, fragment
// stripped. Mirrors what a wiki link resolves through.
std::string canonical_target(std::string target) {
  if (auto hash = target.find('#'); hash != std::string::npos) {
    target.resize(hash);
  }
  std::replace(target.begin(), target.end(), '_', ' ');
  return target;
}

class PageBuilder {
 public:
  PageBuilder(int64_t id, std::string title)
      : id_(id), title_(std::move(title)) {}

  PageBuilder& raw(const std::string& text) {
    wiki_ += text;
    rendered_ += text;
    return *this;
  }

  PageBuilder& link(const std::string& target, const std::string& surface = "") {
    if (surface.empty()) {
      wiki_ += "[[" + target + "]]";
      rendered_ += target;
    } else {
      wiki_ += "[[" + target + "|" + surface + "]]";
      rendered_ += surface;
    }
    targets_.push_back(canonical_target(target));
    return *this;
  }

  // Text below the first section heading; ignored by the extractor.
  PageBuilder& section(const std::string& heading, const std::string& body) {
    section_ += "\n\n== " + heading + " ==\n" + body;
    return *this;
  }

  PageSpec build(const std::map<std::string, std::string>& titles) const {
    PageSpec page;
    page.id = id_;
    page.title = title_;
    page.abstract_text = rendered_;
    page.wikitext = wiki_ + section_;
    for (const std::string& target : targets_) {
      auto it = titles.find(target);
      if (it != titles.end()) page.abstract_entities.push_back(it->second);
    }
    if (auto it = titles.find(title_); it != titles.end()) {
      page.self_entity = it->second;
    }
    return page;
  }

 private:
  int64_t id_;
  std::string title_;
  std::string wiki_;
  std::string rendered_;
  std::string section_;
  std::vector<std::string> targets_;
};

std::string question_for(const std::string& relation_id,
                         const std::string& subject_label) {
  if (relation_id == "P17") {
    return "What country is " + subject_label + " located in?";
  }
  if (relation_id == "P36") {
    return "What city serves as the capital of " + subject_label + "?";
  }
  if (relation_id == "P50") {
    return "Who is the author of " + subject_label + "?";
  }
  if (relation_id == "P69") {
    return "What educational institution did " + subject_label + " attend?";
  }
  if (relation_id == "P112") {
    return "Who founded " + subject_label + "?";
  }
  if (relation_id == "P127") {
    return "Who owns " + subject_label + "?";
  }
  if (relation_id == "P170") {
    return "Who created the painting " + subject_label + "?";
  }
  if (relation_id == "P175") {
    return "Who performs the song " + subject_label + "?";
  }
  if (relation_id == "P286") {
    return "Who is the head coach of " + subject_label + "?";
  }
  if (relation_id == "P800") {
    return "What is the title of a notable work by " + subject_label + "?";
  }
  fail("no question template for relation " + relation_id);
}

const std::vector<std::string>& wrong_pool(const std::string& relation_id) {
  static const std::map<std::string, std::vector<std::string>> kPools = {
      {"P17", {"Canada", "Brazil"}},
      {"P36", {"Marseille", "Kyoto"}},
      {"P50", {"Jonathan Frame", "Alice Renn"}},
      {"P69", {"Stanford University", "Harvard University", "Cornell University"}},
      {"P112", {"Victor Hale"}},
      {"P127", {"Meridian Holdings"}},
      {"P170", {"Auguste Perrin"}},
      {"P175", {"The Meridian Band"}},
      {"P286", {"Walt Simmons"}},
      {"P800", {"The Unwritten Book"}},
  };
  auto it = kPools.find(relation_id);
  if (it == kPools.end()) fail("no wrong-answer pool for " + relation_id);
  return it->second;
}

}  // namespace

const Entity& World::entity(const std::string& id) const {
  for (const Entity& e : entities) {
    if (e.id == id) return e;
  }
  fail("unknown fixture entity " + id);
}

const PlacedTriple& World::placed_triple(const std::string& triple_id) const {
  for (const PlacedTriple& p : placed) {
    if (factpop::triple_id(p.triple) == triple_id) return p;
  }
  fail("no placed triple " + triple_id);
}

World World::create() {
  World w;

  w.relations = {
      {"P17", "country", "sovereign state of this item"},
      {"P36", "capital", "seat of government of this item"},
      {"P50", "author", "main creator of a written work"},
      {"P69", "educated at", "educational institution attended by the subject"},
      {"P112", "founded by", "founder or co-founder of this organization"},
      {"P127", "owned by", "owner of the subject"},
      {"P170", "creator", "maker of this creative work"},
      {"P175", "performer", "performer involved in the performance of this work"},
      {"P286", "head coach", "on-field manager or head coach of this team"},
      {"P800", "notable work",
       "notable scientific, artistic or literary work of the subject"},
  };

  auto ent = [&](std::string id, std::string label,
                 std::vector<std::string> aliases = {}) {
    w.entities.push_back(Entity{std::move(id), std::move(label),
                                std::move(aliases)});
  };

  ent("Q30", "United States of America", {"USA", "US", "United States"});
  ent("Q142", "France");
  ent("Q17", "Japan");
  ent("Q1297", "Chicago", {"Windy City"});
  ent("Q90", "Paris", {"City of Light"});
  ent("Q1490", "Tokyo");
  ent("Q35765", "Osaka");
  ent("Q456", "Lyon");
  ent("Q28515", "Springfield");
  ent("Q100", "Boston");
  ent("Q16559", "Austin");
  ent("Q49112", "Yale University", {"Yale"});
  ent("Q1232773", "Texas A&M University", {"Texas A&M"});
  ent("Q235034", "University of Pittsburgh", {"Pitt"});
  ent("Q13371", "Harvard University", {"Harvard"});
  ent("Q41506", "Stanford University", {"Stanford"});
  ent("Q23505", "George H.W. Bush", {"Bush 41"});
  ent("Q5369427", "Ellen Litman");
  ent("Q7896080", "University of Pittsburgh Press");
  ent("Q71084", "George H.W. Bush Presidential Library");

  const std::vector<std::string> author_names = {
      "Marta Keller",    "Derek Sol",   "Ivo Brandt",  "Lena Forsberg",
      "Tomas Reyes",     "Greta Halvorsen", "Omar Nazari", "June Akana",
      "Pavel Mirek",     "Sofia Lindqvist"};
  const std::vector<std::string> novel_titles = {
      "The Glass Meridian", "Night Ferry",  "A Field of Static",
      "The Cartographer's Daughter", "Winter Harbor", "The Silent Orchard",
      "Red Tram", "Salt and Smoke", "The Last Archive", "Mirror Lake"};
  const std::vector<std::string> song_titles = {"Neon River", "Paper Planets",
                                                "Glasshouse", "Northern Line"};
  const std::vector<std::string> performer_names = {"Mara Voss", "The Quasars",
                                                    "Juno Park", "Silver Field"};
  const std::vector<std::string> universities = {"Q13371", "Q41506", "Q235034",
                                                 "Q49112"};

  for (size_t i = 0; i < author_names.size(); ++i) {
    ent("Q810" + std::to_string(i), author_names[i]);
  }
  for (size_t i = 0; i < novel_titles.size(); ++i) {
    ent("Q820" + std::to_string(i), novel_titles[i]);
  }
  for (size_t i = 0; i < song_titles.size(); ++i) {
    ent("Q830" + std::to_string(i), song_titles[i]);
  }
  for (size_t i = 0; i < performer_names.size(); ++i) {
    ent("Q840" + std::to_string(i), performer_names[i]);
  }
  ent("Q8500", "Austin Falcons");
  ent("Q8501", "Boston Harriers");
  ent("Q8600", "Ray Calloway");
  ent("Q8601", "Nina Petrova");
  ent("Q8700", "Howard Greene");
  ent("Q8800", "The Drowned Cathedral");
  ent("Q8801", "Casimir Holt");

  auto author_id = [](size_t i) { return "Q810" + std::to_string(i); };
  auto novel_id = [](size_t i) { return "Q820" + std::to_string(i); };

  // Core triples; everything here can occur in the corpus.
  auto triple = [&](std::string s, std::string r, std::string o) {
    w.triples.push_back(Triple{std::move(s), std::move(r), std::move(o)});
  };
  triple("Q1297", "P17", "Q30");
  triple("Q28515", "P17", "Q30");
  triple("Q16559", "P17", "Q30");
  triple("Q100", "P17", "Q30");
  triple("Q90", "P17", "Q142");
  triple("Q456", "P17", "Q142");
  triple("Q1490", "P17", "Q17");
  triple("Q35765", "P17", "Q17");
  triple("Q142", "P36", "Q90");
  triple("Q17", "P36", "Q1490");
  triple("Q23505", "P69", "Q49112");
  triple("Q5369427", "P69", "Q235034");
  for (size_t i = 0; i < 10; ++i) {
    triple(author_id(i), "P69", universities[i % universities.size()]);
    triple(author_id(i), "P800", novel_id(i));
    triple(novel_id(i), "P50", author_id(i));
  }
  for (size_t i = 0; i < 4; ++i) {
    triple("Q830" + std::to_string(i), "P175", "Q840" + std::to_string(i));
  }
  triple("Q8500", "P286", "Q8600");
  triple("Q8501", "P286", "Q8601");
  triple("Q8500", "P112", "Q8700");
  triple("Q8800", "P170", "Q8801");
  triple("Q7896080", "P127", "Q235034");

  // Pad with hamlets that never appear in the corpus so the KB holds exactly
  // 200 triples while extraction coverage stays partial, as it would at scale.
  const std::vector<std::string> hamlet_stems = {
      "Alder Hollow", "Birch Falls",  "Cedar Flats", "Dove Creek",
      "Elm Crossing", "Fern Ridge",   "Grey Harbor", "Heron Bend",
      "Ivy Glen",     "Juniper Vale"};
  const std::vector<std::string> countries = {"Q30", "Q142", "Q17"};
  size_t hamlet = 0;
  while (w.triples.size() < 200) {
    std::string id = "Q9" + std::to_string(100 + hamlet);
    std::string label = hamlet_stems[hamlet % hamlet_stems.size()] + " " +
                        std::to_string(1 + hamlet / hamlet_stems.size());
    ent(id, label);
    triple(id, "P17", countries[hamlet % countries.size()]);
    ++hamlet;
  }
  require(w.triples.size() == 200, "KB must hold exactly 200 triples");

  // Title map: entity pages plus a few redirects; several page titles are
  // deliberately absent so those pages resolve no self entity.
  std::map<std::string, std::string> titles;
  auto map_title = [&](const std::string& title, const std::string& id) {
    titles[title] = id;
  };
  for (const Entity& e : w.entities) {
    if (e.id.rfind("Q9", 0) == 0 && e.id.size() >= 5) continue;  // hamlets
    map_title(e.label, e.id);
  }
  map_title("USA", "Q30");
  map_title("United States", "Q30");
  map_title("U.S.", "Q30");
  map_title("Windy City", "Q1297");
  map_title("Pitt", "Q235034");

  // 50 pages. Chicago's country fact recurs on twelve of them, Springfield's
  // on five, Paris/France on five, Tokyo/Japan on three; the rest appear once
  // or twice. Some object anchors use surfaces that are not acceptable
  // answers, so their passages cannot satisfy an extractive reader.
  std::deque<PageBuilder> builders;
  auto page = [&](int64_t id, const std::string& title) -> PageBuilder& {
    builders.emplace_back(id, title);
    return builders.back();
  };

  page(1001, "Ellen Litman")
      .raw("Ellen Litman (born 1973) is an American novelist. She received "
           "the Rona Jaffe Foundation Writers' Award in 2006. Born in Moscow, "
           "Russia, she emigrated with her parents in 1992 to ")
      .link("Pittsburgh, Pennsylvania")
      .raw(". She was educated at the ")
      .link("University of Pittsburgh")
      .raw(" and earned a B.S. in Information Science.");

  page(1002, "George H.W. Bush")
      .raw("George H.W. Bush was the 41st president of ")
      .link("United States of America", "the United States")
      .raw(". He was educated at ")
      .link("Yale University")
      .raw(", where he captained the baseball team.");

  page(1003, "George H.W. Bush Presidential Library")
      .raw("The George H.W. Bush Presidential Library is located on a site "
           "on the west campus of ")
      .link("Texas A&M University")
      .raw(" in College Station, Texas. It honors ")
      .link("George H.W. Bush")
      .raw(".")
      .section("Exhibits",
               "The library also displays [[Yale University]] memorabilia "
               "from the president's student years.");

  page(1004, "Chicago")
      .raw("Chicago is the most populous city on the Great Lakes and a "
           "transport hub of ")
      .link("United_States_of_America", "the United States")
      .raw(".");

  struct ChicagoPage {
    int64_t id;
    const char* title;
    const char* usa_surface;
    bool springfield;
  };
  const std::vector<ChicagoPage> chicago_pages = {
      {1005, "Illinois", "United States", false},
      {1006, "Route 66", "USA", false},
      {1007, "Great Lakes region", "America", false},
      {1008, "Chicago Cubs", "the United States", false},
      {1009, "Willis Tower", "United States", false},
      {1010, "Chicago Blues", "the United States of America", false},
      {1011, "Midwest rail network", "USA", true},
      {1012, "Corn Belt", "America", true},
      {1013, "Lincoln heritage trail", "United States", true},
      {1014, "Prairie State almanac", "United States", true},
      {1015, "O'Hare International Airport", "the United States", false},
  };
  for (const ChicagoPage& cp : chicago_pages) {
    PageBuilder& b = page(cp.id, cp.title);
    b.raw(std::string(cp.title) + " is closely tied to ").link("Chicago");
    if (cp.springfield) {
      b.raw(" and ").link("Springfield");
    }
    b.raw(", within ")
        .link("United States of America", cp.usa_surface)
        .raw(".");
  }

  page(1016, "Springfield")
      .raw("Springfield is a mid-sized capital city in the heartland of ")
      .link("USA", "America")
      .raw(".");

  page(1017, "Paris")
      .raw("Paris is the largest city and the seat of government of ")
      .link("France")
      .raw(".");
  page(1018, "France")
      .raw("France is a country in western Europe; its capital is ")
      .link("Paris")
      .raw(".");
  page(1019, "Seine")
      .raw("The Seine flows through ")
      .link("Paris")
      .raw(" on its way across northern ")
      .link("France")
      .raw(".");
  page(1020, "Louvre")
      .raw("The Louvre in ")
      .link("Paris")
      .raw(" is the most visited museum in ")
      .link("France")
      .raw(".");
  page(1021, "Eiffel Tower")
      .raw("The Eiffel Tower stands in ")
      .link("Paris")
      .raw(" and is a symbol of ")
      .link("France#History", "French")
      .raw(" engineering.");

  page(1022, "Tokyo")
      .raw("Tokyo is the capital and most populous city of ")
      .link("Japan")
      .raw(".");
  page(1023, "Japan")
      .raw("Japan is an island country in East Asia governed from ")
      .link("Tokyo")
      .raw(".");
  page(1024, "Shinkansen")
      .raw("The Shinkansen network radiates from ")
      .link("Tokyo")
      .raw(" across ")
      .link("Japan")
      .raw(".");

  page(1025, "Osaka")
      .raw("Osaka is a port city and commercial center of ")
      .link("Japan", "Nippon")
      .raw(".");

  page(1026, "Lyon")
      .raw("Lyon is a gastronomy capital within ")
      .link("France", "the French Republic")
      .raw(".");
  page(1027, "Rhone Valley")
      .raw("The Rhone Valley runs past ")
      .link("Lyon")
      .raw(" through the southeast of ")
      .link("France", "the French Republic")
      .raw(".")
      .section("Transport",
               "High-speed rail links [[Paris]] with the south of [[France]] "
               "along the valley floor.");

  page(1028, "Austin")
      .raw("Austin is a fast-growing technology city in ")
      .link("United States of America", "the United States")
      .raw(".");
  page(1029, "Boston")
      .raw("Boston is a historic harbor city in ")
      .link("United States of America", "the United States")
      .raw(".");

  for (size_t i = 0; i < 10; ++i) {
    const Entity& uni = w.entity(universities[i % universities.size()]);
    page(1030 + static_cast<int64_t>(i), author_names[i])
        .raw(author_names[i] + " is a novelist whose debut ")
        .link(novel_titles[i])
        .raw(" drew wide notice. ")
        .raw(i % 2 == 0 ? "She" : "He")
        .raw(" was educated at ")
        .link(uni.label)
        .raw(".");
  }

  page(1040, "The Glass Meridian")
      .raw("The Glass Meridian is a novel by ")
      .link("Marta Keller")
      .raw(" about a lighthouse keeper's ledger.");
  page(1041, "A Field of Static")
      .raw("A Field of Static is a novel by ")
      .link("Ivo Brandt")
      .raw(" set among radio astronomers.");

  page(1042, "Neon River")
      .raw("\"Neon River\" is a song recorded by ")
      .link("Mara Voss")
      .raw(" for her second studio album.");
  page(1043, "Paper Planets")
      .raw("\"Paper Planets\" is a single by ")
      .link("The Quasars")
      .raw(" released to college radio.");
  page(1044, "Glasshouse")
      .raw("\"Glasshouse\" is a ballad performed by ")
      .link("Juno Park")
      .raw(".");

  page(1045, "Austin Falcons")
      .raw("The Austin Falcons are a baseball club based in ")
      .link("Austin")
      .raw(". The team is led by head coach ")
      .link("Ray Calloway")
      .raw(" and was founded by ")
      .link("Howard Greene")
      .raw(".");
  page(1046, "Boston Harriers")
      .raw("The Boston Harriers are an athletics club coached by ")
      .link("Nina Petrova")
      .raw(".");

  page(1047, "The Drowned Cathedral")
      .raw("The Drowned Cathedral is a painting by ")
      .link("Casimir Holt")
      .raw(" depicting a flooded nave.");

  page(1048, "University of Pittsburgh Press")
      .raw("The University of Pittsburgh Press is a scholarly publishing "
           "house owned by the ")
      .link("University of Pittsburgh")
      .raw(".");

  page(1049, "University of Pittsburgh")
      .raw("The University of Pittsburgh is a public research university in ")
      .link("Pittsburgh, Pennsylvania")
      .raw(".");
  page(1050, "Yale University")
      .raw("Yale University is a private research university in ")
      .link("New Haven")
      .raw(".");

  for (const PageBuilder& b : builders) {
    w.pages.push_back(b.build(titles));
  }
  require(w.pages.size() == 50, "corpus must hold exactly 50 pages");

  for (const auto& [title, id] : titles) {
    w.title_map.emplace_back(title, id);
  }
  std::sort(w.title_map.begin(), w.title_map.end());

  w.page_views = {
      {"Austin Falcons", 8000},       {"Chicago", 2500000},
      {"Ellen Litman", 1200},         {"France", 2100000},
      {"George H.W. Bush", 900000},   {"Japan", 2000000},
      {"Paris", 1800000},             {"Tokyo", 1600000},
  };

  // Realized instance counts: a page contributes one instance per KB triple
  // whose subject and object are both in its mention set.
  std::map<std::string, const Entity*> by_id;
  for (const Entity& e : w.entities) by_id[e.id] = &e;
  std::map<std::pair<std::string, std::string>, uint64_t> sr_counts;
  std::map<std::string, uint64_t> s_counts;
  std::set<Triple> placed_set;
  for (const PageSpec& p : w.pages) {
    std::set<std::string> mentioned(p.abstract_entities.begin(),
                                    p.abstract_entities.end());
    if (!p.self_entity.empty()) mentioned.insert(p.self_entity);
    for (const Triple& t : w.triples) {
      if (mentioned.count(t.subject) && mentioned.count(t.object)) {
        ++sr_counts[{t.subject, t.relation}];
        ++s_counts[t.subject];
        placed_set.insert(t);
      }
    }
  }
  require(placed_set.size() == 50, "expected exactly 50 placed triples, got " +
                                       std::to_string(placed_set.size()));

  const Triple bush{"Q23505", "P69", "Q49112"};
  const Triple sol{"Q8101", "P800", "Q8201"};  // never passes the round trip

  std::map<std::string, const Relation*> rel_by_id;
  for (const Relation& r : w.relations) rel_by_id[r.id] = &r;

  for (const Triple& t : placed_set) {
    PlacedTriple p;
    p.triple = t;
    p.subject_label = by_id.at(t.subject)->label;
    const Relation* rel = rel_by_id.at(t.relation);
    p.relation_label = rel->label;
    p.relation_description = rel->description;
    p.object_label = by_id.at(t.object)->label;
    p.answers.push_back(p.object_label);
    for (const std::string& a : by_id.at(t.object)->aliases) {
      p.answers.push_back(a);
    }
    std::sort(p.answers.begin(), p.answers.end());
    p.answers.erase(std::unique(p.answers.begin(), p.answers.end()),
                    p.answers.end());
    p.sr_count = sr_counts.at({t.subject, t.relation});
    p.s_count = s_counts.at(t.subject);
    p.human_queue = (t == sol);
    p.roundtrip_second = (t == bush);
    p.question = p.human_queue
                     ? "What is the name of the novel Derek Sol wrote?"
                     : question_for(t.relation, p.subject_label);
    p.vanilla_correct = p.sr_count >= 3;
    p.gc_gold = p.sr_count >= 2;
    w.placed.push_back(std::move(p));
  }

  // The scripted question must contain the subject and avoid the object
  // unless the object sits inside the subject label.
  bool covered_bins[3] = {false, false, false};
  std::set<std::string> seen_questions;
  for (const PlacedTriple& p : w.placed) {
    require(factpop::contains_normalized(p.question, p.subject_label),
            "question lacks subject: " + p.question);
    if (factpop::contains_normalized(p.question, p.object_label)) {
      require(factpop::contains_normalized(p.subject_label, p.object_label),
              "question leaks object: " + p.question);
    }
    require(seen_questions.insert(p.question).second,
            "duplicate question: " + p.question);
    if (p.sr_count >= 1 && p.sr_count < 5) covered_bins[0] = true;
    if (p.sr_count >= 5 && p.sr_count < 10) covered_bins[1] = true;
    if (p.sr_count >= 10 && p.sr_count < 50) covered_bins[2] = true;
  }
  require(covered_bins[0] && covered_bins[1] && covered_bins[2],
          "S-R counts must cover the first three bins");
  require(sr_counts.at({"Q1297", "P17"}) == 12, "Chicago fact should recur 12x");
  require(sr_counts.at({"Q28515", "P17"}) == 5, "Springfield fact should recur 5x");

  // Scripted LM rules, in match order. The refinement rule for the Bush
  // triple precedes its generation rule so the post-feedback attempt wins.
  std::ostringstream rules;
  auto emit = [&](json j) { rules << j.dump() << "\n"; };

  const std::string bush_good =
      "What educational institution did George H.W. Bush attend?";
  const std::string bush_bad =
      "What educational institution did the 41st president attend?";
  const std::string sol_bad =
      "Which novel Night Ferry did Derek Sol write?";

  emit(json{{"keys", json::array({"Given a context and a triple",
                                  "## Subject:\nGeorge H.W. Bush\n",
                                  factpop::kFeedbackMissingSubject})},
            {"response", bush_good}});

  for (const PlacedTriple& p : w.placed) {
    std::string background;
    if (p.gc_gold) {
      background = "Background: " + p.subject_label + " " + p.relation_label +
                   " " + p.object_label + ".";
    } else {
      // The subject-mentioning variant can collide with short answer
      // aliases ("US" hides inside "Austin"), hence the neutral fallbacks.
      const std::string candidates[] = {
          "Background: " + p.subject_label +
              " has a long history, and records about its " +
              p.relation_label + " are sparse.",
          "Background: archival coverage of this topic is thin and often "
          "contradictory.",
          "Background: little reliable documentation has been digitized.",
      };
      for (const std::string& candidate : candidates) {
        if (!factpop::substring_em(candidate, p.answers)) {
          background = candidate;
          break;
        }
      }
      require(!background.empty() &&
                  !factpop::substring_em(background, p.answers),
              "miss background leaks an answer for " +
                  factpop::triple_id(p.triple));
    }
    emit(json{{"keys",
               json::array({"Generate a background document from Wikipedia "
                            "to answer the given question. " +
                            p.question})},
              {"response", background}});
    emit(json{{"keys", json::array({"# Context:\n" + background,
                                    "# Question:\n" + p.question + "\n"})},
              {"response", p.gc_gold ? p.object_label : "unknown"}});
  }

  for (const PlacedTriple& p : w.placed) {
    std::string generated = p.question;
    if (p.roundtrip_second) generated = bush_bad;
    if (p.human_queue) generated = sol_bad;
    emit(json{{"keys", json::array({"Given a context and a triple",
                                    "## Subject:\n" + p.subject_label + "\n",
                                    "## Relation:\n" + p.relation_label + "\n",
                                    "## Object:\n" + p.object_label + "\n"})},
              {"response", generated}});
  }

  auto answer_rule = [&](const std::string& question,
                         const std::string& response) {
    emit(json{{"keys", json::array({"Given a context and a question",
                                    "# Question:\n" + question + "\n"})},
              {"response", response}});
  };
  for (const PlacedTriple& p : w.placed) {
    answer_rule(p.question, p.object_label);
    if (p.roundtrip_second) answer_rule(bush_bad, p.object_label);
    if (p.human_queue) answer_rule(sol_bad, p.object_label);
  }

  for (const PlacedTriple& p : w.placed) {
    std::string response = p.object_label;
    if (!p.vanilla_correct) {
      response.clear();
      for (const std::string& candidate : wrong_pool(p.triple.relation)) {
        if (!factpop::substring_em(candidate, p.answers)) {
          response = candidate;
          break;
        }
      }
      require(!response.empty(),
              "no usable wrong answer for " + factpop::triple_id(p.triple));
    }
    emit(json{{"match", factpop::render_vanilla_prompt(p.question)},
              {"response", response}});
  }

  emit(json{{"default", "unknown"}});
  w.mock_lm_jsonl = rules.str();

  json rewrite{{"id", factpop::triple_id(sol)},
               {"question", "What is the name of the novel Derek Sol wrote?"}};
  w.human_rewrites_jsonl = rewrite.dump() + "\n";

  std::sort(w.placed.begin(), w.placed.end(),
            [](const PlacedTriple& a, const PlacedTriple& b) {
              return a.triple < b.triple;
            });
  return w;
}

void World::write(const std::filesystem::path& root) const {
  namespace fs = std::filesystem;
  fs::create_directories(root / "kb");
  fs::create_directories(root / "corpus");
  fs::create_directories(root / "views");
  fs::create_directories(root / "mocks");

  factpop::atomic_write(root / "kb" / "entities.tsv", [&](std::ostream& os) {
    for (const Entity& e : entities) {
      os << e.id << "\t" << e.label << "\t" << factpop::join(e.aliases, "|")
         << "\n";
    }
  });
  factpop::atomic_write(root / "kb" / "relations.tsv", [&](std::ostream& os) {
    for (const Relation& r : relations) {
      os << r.id << "\t" << r.label << "\t" << r.description << "\n";
    }
  });
  factpop::atomic_write(root / "kb" / "triples.tsv", [&](std::ostream& os) {
    for (const Triple& t : triples) {
      os << t.subject << "\t" << t.relation << "\t" << t.object << "\n";
    }
  });
  factpop::atomic_write(root / "corpus" / "dump.jsonl", [&](std::ostream& os) {
    for (const PageSpec& p : pages) {
      os << json{{"page_id", p.id}, {"title", p.title},
                 {"wikitext", p.wikitext}}
                .dump()
         << "\n";
    }
  });
  factpop::atomic_write(root / "corpus" / "title_map.tsv",
                        [&](std::ostream& os) {
                          for (const auto& [title, id] : title_map) {
                            os << title << "\t" << id << "\n";
                          }
                        });
  factpop::atomic_write(root / "views" / "page_views.tsv",
                        [&](std::ostream& os) {
                          for (const auto& [label, views] : page_views) {
                            os << label << "\t" << views << "\n";
                          }
                        });
  factpop::atomic_write(root / "mocks" / "mock_lm.jsonl",
                        [&](std::ostream& os) { os << mock_lm_jsonl; });
  factpop::atomic_write(root / "mocks" / "human_rewrites.jsonl",
                        [&](std::ostream& os) { os << human_rewrites_jsonl; });

  json config{
      {"entities_tsv", "kb/entities.tsv"},
      {"relations_tsv", "kb/relations.tsv"},
      {"triples_tsv", "kb/triples.tsv"},
      {"dump", "corpus/dump.jsonl"},
      {"title_map", "corpus/title_map.tsv"},
      {"page_views", "views/page_views.tsv"},
      {"out_dir", "out"},
      {"bin_edges", {1, 5, 10, 50, 100, 500, 1000}},
      {"cap", 200},
      {"roundtrip_k", 3},
      {"chunk_size", 32},
      {"chunk_overlap", 0},
      {"bm25_k1", 1.2},
      {"bm25_b", 0.75},
      {"top_k", 2},
      {"bootstrap_samples", 1000},
      {"bootstrap_level", 0.95},
      {"seed", 12345},
      {"trials", 1},
      {"max_concurrent_requests", 4},
      {"mock_lm", "mocks/mock_lm.jsonl"},
      {"mock_nli", "lexical"},
  };
  factpop::atomic_write(root / "config.json", [&](std::ostream& os) {
    os << config.dump(2) << "\n";
  });
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<uint64_t> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("factpop_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace fixtures
