#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factpop/corpus_ingest.hpp"
#include "factpop/kb_store.hpp"
#include "factpop/model_clients.hpp"
#include "factpop/popularity.hpp"

namespace factpop {

// Benchmark construction: popularity-binned sampling, entailment-selected
// supporting passages, and round-trip question generation with refinement.

struct Interval {
  uint64_t lo = 1;
  uint64_t hi = UINT64_MAX;  // exclusive; UINT64_MAX marks the unbounded tail
  bool contains(uint64_t v) const { return v >= lo && (hi == UINT64_MAX || v < hi); }
  std::string label() const;  // "[1,5)" or "1000+"
};

struct BinSpec {
  std::vector<Interval> intervals;
  uint64_t cap = 200;

  // Seven bins [1,5) [5,10) [10,50) [50,100) [100,500) [500,1000) 1000+,
  // cap 200.
  static BinSpec standard();
  // Intervals must be ordered, contiguous, start at 1, end unbounded; cap >= 1.
  void validate() const;
  static constexpr size_t npos = SIZE_MAX;
  size_t bin_of(uint64_t sr_count) const;  // npos for count 0
};

struct TranscriptEntry {
  std::string role;  // prompt | question | answer | feedback | note
  std::string text;
  bool operator==(const TranscriptEntry& o) const {
    return role == o.role && text == o.text;
  }
};

struct QAItem {
  std::string id;  // subject|relation|object
  std::string subject_id;
  std::string subject_label;
  std::string relation_id;
  std::string relation_label;
  std::string object_id;
  std::string object_label;
  std::string question;
  std::vector<std::string> acceptable_answers;
  std::string passage_text;
  int64_t passage_page_id = 0;
  uint64_t s_count = 0;
  uint64_t sr_count = 0;
  std::optional<uint64_t> page_views;
  std::string provenance;  // roundtrip-1 | roundtrip-2 | ... | human

  bool operator==(const QAItem& o) const;
};

// A triple whose round trip never produced a valid question; same record as
// QAItem minus the question, plus the generation transcript.
struct HumanQueueEntry {
  QAItem skeleton;  // question empty, provenance "human"
  std::vector<TranscriptEntry> transcript;
};

struct CriteriaResult {
  bool answerable = false;
  bool has_subject = false;
  bool no_object = false;
  bool all() const { return answerable && has_subject && no_object; }
};

// answerable: substring exact match of lm_answer against answers.
// has_subject: normalized subject label occurs in the normalized question.
// no_object: normalized object label absent from the normalized question;
// with screen_aliases every acceptable answer is screened too, except
// answers that are substrings of the subject label (unavoidable).
CriteriaResult check_criteria(const std::string& question,
                              const std::string& subject_label,
                              const std::string& object_label,
                              const std::string& lm_answer,
                              const std::vector<std::string>& answers,
                              bool screen_aliases = false);

std::string triple_id(const Triple& t);

// Entailment hypothesis for a triple's surface forms.
std::string triple_hypothesis(const std::string& subject_label,
                              const std::string& relation_label,
                              const std::string& object_label);

struct PassageChoice {
  const PassageRecord* passage = nullptr;
  double score = 0.0;
  size_t failed_candidates = 0;
};

// Argmax of scorer over candidates; ties go to the lowest page_id. Candidates
// the scorer fails on are skipped; all failing is an error.
PassageChoice select_supporting_passage(
    const std::string& subject_label, const std::string& relation_label,
    const std::string& object_label,
    const std::vector<const PassageRecord*>& candidates,
    EntailmentClient& scorer);

// Uniform without-replacement sample of min(cap, available) triples per
// (relation, bin) cell. Output cells follow the relations list then bin
// order; triples within a cell are sorted. Deterministic given the seed.
std::vector<Triple> sample_triples(const CountIndex& counts,
                                   const std::vector<Triple>& triples,
                                   const std::vector<std::string>& relations,
                                   const BinSpec& bins, uint64_t seed);

struct RoundTripOptions {
  int k = 3;                          // max generation calls per triple
  bool screen_answer_aliases = false;
  RetryPolicy retry;
};

struct RoundTripResult {
  bool accepted = false;
  std::string question;
  std::string provenance;    // roundtrip-<i> when accepted
  std::string final_answer;  // LM answer from the accepting iteration
  int generation_calls = 0;
  std::vector<TranscriptEntry> transcript;
  std::string failure_note;  // transport failure description, if any
};

// One run of the refinement loop for a triple. The LM sees the question
// prompt first; each failed check appends the matching feedback message and
// the conversation so far is replayed for the next attempt. Answer checks use
// the contextual template with the supporting passage.
RoundTripResult generate_question_roundtrip(
    const std::string& subject_label, const std::string& relation_label,
    const std::string& relation_description, const std::string& object_label,
    const std::string& passage_text, const std::vector<std::string>& answers,
    LmClient& lm, const RoundTripOptions& opts = {});

// Writes items that satisfy the dataset invariants; violations are skipped
// and reported as "id: reason" strings. Import round-trips exported records.
void export_dataset(const std::vector<QAItem>& items,
                    const std::filesystem::path& path,
                    std::vector<std::string>* rejects = nullptr);
std::vector<QAItem> import_dataset(const std::filesystem::path& path);

void export_human_queue(const std::vector<HumanQueueEntry>& entries,
                        const std::filesystem::path& path);
std::vector<HumanQueueEntry> import_human_queue(
    const std::filesystem::path& path);

// Folds annotator-written questions (id -> question) back into QAItems.
// HasSubject is enforced and Answerable re-verified with the passage before
// an item is accepted with provenance "human".
std::vector<QAItem> import_human_questions(
    const std::vector<HumanQueueEntry>& queue,
    const std::map<std::string, std::string>& question_by_id, LmClient& lm,
    const RoundTripOptions& opts = {},
    std::vector<std::string>* rejects = nullptr);

}  // namespace factpop
