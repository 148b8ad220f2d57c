#include "factpop/dataset_builder.hpp"

#include <algorithm>
#include <set>

#include "factpop/metrics.hpp"
#include "factpop/prompts.hpp"
#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"
#include "json.hpp"

namespace factpop {

std::string Interval::label() const {
  if (hi == UINT64_MAX) return std::to_string(lo) + "+";
  return "[" + std::to_string(lo) + "," + std::to_string(hi) + ")";
}

BinSpec BinSpec::standard() {
  BinSpec spec;
  spec.intervals = {{1, 5},    {5, 10},    {10, 50},     {50, 100},
                    {100, 500}, {500, 1000}, {1000, UINT64_MAX}};
  spec.cap = 200;
  return spec;
}

void BinSpec::validate() const {
  if (cap < 1) throw UserError("bin cap must be >= 1");
  if (intervals.empty()) throw UserError("bin spec needs at least one interval");
  if (intervals.front().lo != 1) throw UserError("bins must start at count 1");
  for (size_t i = 0; i < intervals.size(); ++i) {
    const Interval& iv = intervals[i];
    bool last = i + 1 == intervals.size();
    if (!last) {
      if (iv.hi == UINT64_MAX) {
        throw UserError("only the last bin may be unbounded");
      }
      if (iv.hi <= iv.lo) throw UserError("empty bin interval " + iv.label());
      if (intervals[i + 1].lo != iv.hi) {
        throw UserError("bins must be contiguous at " + iv.label());
      }
    } else if (iv.hi != UINT64_MAX) {
      throw UserError("last bin must be unbounded to cover all counts");
    }
  }
}

size_t BinSpec::bin_of(uint64_t sr_count) const {
  if (sr_count == 0) return npos;
  for (size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].contains(sr_count)) return i;
  }
  return npos;
}

bool QAItem::operator==(const QAItem& o) const {
  return id == o.id && subject_id == o.subject_id &&
         subject_label == o.subject_label && relation_id == o.relation_id &&
         relation_label == o.relation_label && object_id == o.object_id &&
         object_label == o.object_label && question == o.question &&
         acceptable_answers == o.acceptable_answers &&
         passage_text == o.passage_text &&
         passage_page_id == o.passage_page_id && s_count == o.s_count &&
         sr_count == o.sr_count && page_views == o.page_views &&
         provenance == o.provenance;
}

std::string triple_id(const Triple& t) {
  return t.subject + "|" + t.relation + "|" + t.object;
}

std::string triple_hypothesis(const std::string& subject_label,
                              const std::string& relation_label,
                              const std::string& object_label) {
  return subject_label + " " + relation_label + " " + object_label;
}

CriteriaResult check_criteria(const std::string& question,
                              const std::string& subject_label,
                              const std::string& object_label,
                              const std::string& lm_answer,
                              const std::vector<std::string>& answers,
                              bool screen_aliases) {
  CriteriaResult res;
  res.answerable = substring_em(lm_answer, answers);
  res.has_subject = contains_normalized(question, subject_label);
  res.no_object = !contains_normalized(question, object_label);
  if (res.no_object && screen_aliases) {
    for (const std::string& answer : answers) {
      // Answers embedded in the subject label cannot be kept out of a
      // question that must contain the subject.
      if (contains_normalized(subject_label, answer)) continue;
      if (contains_normalized(question, answer)) {
        res.no_object = false;
        break;
      }
    }
  }
  return res;
}

PassageChoice select_supporting_passage(
    const std::string& subject_label, const std::string& relation_label,
    const std::string& object_label,
    const std::vector<const PassageRecord*>& candidates,
    EntailmentClient& scorer) {
  if (candidates.empty()) {
    throw UserError("no candidate passages for " +
                    triple_hypothesis(subject_label, relation_label, object_label));
  }
  std::string hypothesis =
      triple_hypothesis(subject_label, relation_label, object_label);
  PassageChoice best;
  for (const PassageRecord* candidate : candidates) {
    double score;
    try {
      score = nli_score(scorer, {candidate->text, hypothesis});
    } catch (const TransportError&) {
      ++best.failed_candidates;
      continue;
    }
    bool better = !best.passage || score > best.score ||
                  (score == best.score && candidate->page_id < best.passage->page_id);
    if (better) {
      best.passage = candidate;
      best.score = score;
    }
  }
  if (!best.passage) {
    throw UserError("entailment scoring failed for every candidate of " +
                    hypothesis);
  }
  return best;
}

std::vector<Triple> sample_triples(const CountIndex& counts,
                                   const std::vector<Triple>& triples,
                                   const std::vector<std::string>& relations,
                                   const BinSpec& bins, uint64_t seed) {
  bins.validate();

  // Deterministic, deduplicated cell pools.
  std::map<std::pair<std::string, size_t>, std::vector<Triple>> cells;
  std::set<std::string> wanted(relations.begin(), relations.end());
  std::set<Triple> seen;
  for (const Triple& t : triples) {
    if (!wanted.count(t.relation)) continue;
    if (!seen.insert(t).second) continue;
    size_t bin = bins.bin_of(counts.sr_count(t.subject, t.relation));
    if (bin == BinSpec::npos) continue;
    cells[{t.relation, bin}].push_back(t);
  }

  std::vector<Triple> out;
  for (const std::string& relation : relations) {
    for (size_t bin = 0; bin < bins.intervals.size(); ++bin) {
      auto it = cells.find({relation, bin});
      if (it == cells.end()) continue;
      std::vector<Triple>& pool = it->second;
      std::sort(pool.begin(), pool.end());
      std::mt19937_64 rng(mix_seed(seed, {fnv1a64(relation), bin}));
      auto picks = sample_indices(pool.size(), bins.cap, rng);
      std::vector<Triple> cell;
      cell.reserve(picks.size());
      for (size_t i : picks) cell.push_back(pool[i]);
      std::sort(cell.begin(), cell.end());
      out.insert(out.end(), cell.begin(), cell.end());
    }
  }
  return out;
}

namespace {

// The refinement conversation the LM sees: the generation prompt followed by
// alternating questions and feedback, blank-line separated.
std::string render_conversation(const std::vector<TranscriptEntry>& transcript) {
  std::string out;
  for (const TranscriptEntry& entry : transcript) {
    if (entry.role == "answer" || entry.role == "note") continue;
    if (!out.empty()) out += "\n\n";
    out += entry.text;
  }
  return out;
}

}  // namespace

RoundTripResult generate_question_roundtrip(
    const std::string& subject_label, const std::string& relation_label,
    const std::string& relation_description, const std::string& object_label,
    const std::string& passage_text, const std::vector<std::string>& answers,
    LmClient& lm, const RoundTripOptions& opts) {
  if (opts.k < 1) throw UserError("round-trip budget k must be >= 1");

  RoundTripResult res;
  QuestionPromptInputs inputs{passage_text, subject_label, relation_label,
                              relation_description, object_label};
  res.transcript.push_back({"prompt", render_question_prompt(inputs)});

  std::string subject_norm = normalize_surface(subject_label);
  std::string object_norm = normalize_surface(object_label);
  bool subject_in_object = object_norm.find(subject_norm) != std::string::npos;
  bool object_in_subject = subject_norm.find(object_norm) != std::string::npos;

  for (int i = 1; i <= opts.k; ++i) {
    std::string question;
    try {
      question = complete_with_retry(
          lm, {render_conversation(res.transcript), 0.0, 512}, opts.retry);
    } catch (const TransportError& e) {
      res.failure_note = std::string("question generation failed: ") + e.what();
      res.transcript.push_back({"note", res.failure_note});
      return res;
    }
    ++res.generation_calls;
    res.transcript.push_back({"question", question});

    std::string answer;
    try {
      answer = complete_with_retry(
          lm, {render_context_prompt(passage_text, question), 0.0, 256},
          opts.retry);
    } catch (const TransportError& e) {
      res.failure_note = std::string("answer check failed: ") + e.what();
      res.transcript.push_back({"note", res.failure_note});
      return res;
    }
    res.transcript.push_back({"answer", answer});

    CriteriaResult crit = check_criteria(question, subject_label, object_label,
                                         answer, answers,
                                         opts.screen_answer_aliases);
    std::string feedback;
    if (crit.all()) {
      res.accepted = true;
    } else if (!crit.answerable && crit.has_subject && crit.no_object) {
      feedback = kFeedbackUnanswerable;
    } else if (!crit.has_subject && crit.no_object) {
      feedback = kFeedbackMissingSubject;
    } else if (!crit.has_subject && !crit.no_object) {
      feedback = kFeedbackMissingSubjectHasObject;
    } else {  // has_subject && !no_object
      if (subject_in_object && subject_norm != object_norm) {
        feedback = kFeedbackSubjectInsideObject;
      } else if (object_in_subject) {
        // The object is unavoidable inside the subject; answerability alone
        // decides.
        if (crit.answerable) {
          res.accepted = true;
        } else {
          feedback = kFeedbackUnanswerableObjectInSubject;
        }
      } else {
        feedback = kFeedbackHasObject;
      }
    }

    if (res.accepted) {
      res.question = question;
      res.final_answer = answer;
      res.provenance = "roundtrip-" + std::to_string(i);
      return res;
    }
    res.transcript.push_back({"feedback", feedback});
  }
  return res;
}

namespace {

nlohmann::json item_to_json(const QAItem& item) {
  nlohmann::json rec;
  rec["id"] = item.id;
  rec["subject_id"] = item.subject_id;
  rec["subject_label"] = item.subject_label;
  rec["relation_id"] = item.relation_id;
  rec["relation_label"] = item.relation_label;
  rec["object_id"] = item.object_id;
  rec["object_label"] = item.object_label;
  rec["question"] = item.question;
  rec["acceptable_answers"] = item.acceptable_answers;
  rec["passage_text"] = item.passage_text;
  rec["passage_page_id"] = item.passage_page_id;
  rec["s_count"] = item.s_count;
  rec["sr_count"] = item.sr_count;
  if (item.page_views) rec["page_views"] = *item.page_views;
  rec["provenance"] = item.provenance;
  return rec;
}

QAItem item_from_json(const nlohmann::json& rec) {
  QAItem item;
  item.id = rec.at("id").get<std::string>();
  item.subject_id = rec.at("subject_id").get<std::string>();
  item.subject_label = rec.at("subject_label").get<std::string>();
  item.relation_id = rec.at("relation_id").get<std::string>();
  item.relation_label = rec.at("relation_label").get<std::string>();
  item.object_id = rec.at("object_id").get<std::string>();
  item.object_label = rec.at("object_label").get<std::string>();
  item.question = rec.value("question", std::string());
  item.acceptable_answers =
      rec.at("acceptable_answers").get<std::vector<std::string>>();
  item.passage_text = rec.at("passage_text").get<std::string>();
  item.passage_page_id = rec.at("passage_page_id").get<int64_t>();
  item.s_count = rec.at("s_count").get<uint64_t>();
  item.sr_count = rec.at("sr_count").get<uint64_t>();
  if (rec.contains("page_views")) {
    item.page_views = rec["page_views"].get<uint64_t>();
  }
  item.provenance = rec.at("provenance").get<std::string>();
  return item;
}

// Empty string when valid, otherwise the violated invariant's name.
std::string validate_item(const QAItem& item) {
  if (item.question.empty()) return "EmptyQuestion";
  if (item.acceptable_answers.empty()) return "EmptyAnswers";
  for (const std::string& a : item.acceptable_answers) {
    if (normalize_surface(a).empty()) return "EmptyAnswers";
  }
  if (!contains_normalized(item.question, item.subject_label)) {
    return "HasSubject";
  }
  bool roundtrip = item.provenance.rfind("roundtrip-", 0) == 0;
  if (roundtrip && contains_normalized(item.question, item.object_label)) {
    // Waived when the object label sits inside the subject label; such
    // questions are accepted through the answerable-only path.
    if (!contains_normalized(item.subject_label, item.object_label)) {
      return "NoObject";
    }
  }
  if (!roundtrip && item.provenance != "human") return "Provenance";
  return "";
}

}  // namespace

void export_dataset(const std::vector<QAItem>& items,
                    const std::filesystem::path& path,
                    std::vector<std::string>* rejects) {
  std::vector<const QAItem*> valid;
  for (const QAItem& item : items) {
    std::string reason = validate_item(item);
    if (reason.empty()) {
      valid.push_back(&item);
    } else if (rejects) {
      rejects->push_back(item.id + ": " + reason);
    }
  }
  atomic_write(path, [&](std::ostream& out) {
    for (const QAItem* item : valid) out << item_to_json(*item).dump() << "\n";
  });
}

std::vector<QAItem> import_dataset(const std::filesystem::path& path) {
  std::vector<QAItem> items;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid dataset record");
    }
    items.push_back(item_from_json(rec));
  }
  return items;
}

void export_human_queue(const std::vector<HumanQueueEntry>& entries,
                        const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const HumanQueueEntry& entry : entries) {
      nlohmann::json rec = item_to_json(entry.skeleton);
      rec.erase("question");
      nlohmann::json transcript = nlohmann::json::array();
      for (const TranscriptEntry& t : entry.transcript) {
        transcript.push_back({{"role", t.role}, {"text", t.text}});
      }
      rec["transcript"] = std::move(transcript);
      out << rec.dump() << "\n";
    }
  });
}

std::vector<HumanQueueEntry> import_human_queue(
    const std::filesystem::path& path) {
  std::vector<HumanQueueEntry> entries;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid queue record");
    }
    HumanQueueEntry entry;
    entry.skeleton = item_from_json(rec);
    for (const auto& t : rec.at("transcript")) {
      entry.transcript.push_back(TranscriptEntry{
          t.at("role").get<std::string>(), t.at("text").get<std::string>()});
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<QAItem> import_human_questions(
    const std::vector<HumanQueueEntry>& queue,
    const std::map<std::string, std::string>& question_by_id, LmClient& lm,
    const RoundTripOptions& opts, std::vector<std::string>* rejects) {
  std::vector<QAItem> accepted;
  for (const HumanQueueEntry& entry : queue) {
    auto it = question_by_id.find(entry.skeleton.id);
    if (it == question_by_id.end()) {
      if (rejects) rejects->push_back(entry.skeleton.id + ": NoQuestion");
      continue;
    }
    const std::string& question = it->second;
    if (!contains_normalized(question, entry.skeleton.subject_label)) {
      if (rejects) rejects->push_back(entry.skeleton.id + ": HasSubject");
      continue;
    }
    std::string answer;
    try {
      answer = complete_with_retry(
          lm,
          {render_context_prompt(entry.skeleton.passage_text, question), 0.0,
           256},
          opts.retry);
    } catch (const TransportError& e) {
      if (rejects) {
        rejects->push_back(entry.skeleton.id + ": Transport: " + e.what());
      }
      continue;
    }
    if (!substring_em(answer, entry.skeleton.acceptable_answers)) {
      if (rejects) rejects->push_back(entry.skeleton.id + ": Answerable");
      continue;
    }
    QAItem item = entry.skeleton;
    item.question = question;
    item.provenance = "human";
    accepted.push_back(std::move(item));
  }
  return accepted;
}

}  // namespace factpop
