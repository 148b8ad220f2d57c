#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "factpop/dataset_builder.hpp"
#include "factpop/metrics.hpp"
#include "factpop/model_clients.hpp"
#include "factpop/popularity.hpp"
#include "factpop/retrieval.hpp"

namespace factpop {

enum class EvalMode { Vanilla, Bm25, GeneratedContext, Oracle };

std::string mode_name(EvalMode mode);
EvalMode mode_from_name(const std::string& name);

struct EvalRecord {
  std::string qa_id;
  std::string mode;
  std::string prediction;
  bool answer_correct = false;
  std::optional<bool> passage_correct;   // present iff mode != vanilla
  std::optional<std::string> context_used;  // chunk ids / oracle page / marker
  bool failed = false;   // transport failure; excluded from accuracy
  bool refusal = false;  // diagnostic tag, never affects scoring
};

struct PredictOptions {
  int top_k = 1;
  bool compact_templates = false;  // single-line template family
  RetryPolicy retry;
};

// One QA prediction. Vanilla renders the question-only template; the
// augmented modes render the contextual template with context from BM25
// retrieval, LM-generated background text, or the item's own passage.
EvalRecord predict(const QAItem& item, EvalMode mode, LmClient& lm,
                   const Bm25Index* index, const PredictOptions& opts = {});

// predict over the whole dataset, records in dataset order. Items run
// concurrently up to `workers`.
std::vector<EvalRecord> evaluate_dataset(const std::vector<QAItem>& items,
                                         EvalMode mode, LmClient& lm,
                                         const Bm25Index* index,
                                         const PredictOptions& opts = {},
                                         int workers = 1);

void save_records(const std::filesystem::path& path,
                  const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);

struct Ci {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap over resampled means; deterministic given seed.
Ci bootstrap_ci(const std::vector<bool>& outcomes, int samples = 1000,
                double level = 0.95, uint64_t seed = 0);

struct SliceReport {
  std::string label;
  size_t n = 0;
  size_t correct = 0;
  double accuracy = 0.0;
  Ci ci;
};

struct ModeReport {
  std::string mode;
  size_t n = 0;        // scored records (failures excluded)
  size_t correct = 0;
  size_t failed = 0;
  size_t refusals = 0;
  double accuracy = 0.0;
  Ci ci;
  std::vector<SliceReport> bins;
  std::vector<SliceReport> quadrants;
  std::optional<double> passage_accuracy;  // augmented modes
  std::optional<double> agreement_ratio;   // answer_correct == passage_correct
};

struct Report {
  uint64_t sr_median = 0;
  uint64_t s_median = 0;
  std::vector<ModeReport> modes;
};

// Aggregates records (possibly several modes) against the dataset. Items are
// bucketed once per bin (by S-R count) and once per quadrant (vs medians).
Report build_report(const std::vector<EvalRecord>& records,
                    const std::vector<QAItem>& items, const BinSpec& bins,
                    uint64_t sr_median, uint64_t s_median, uint64_t seed,
                    int bootstrap_samples = 1000, double level = 0.95);

std::string report_to_json(const Report& report);
std::string report_to_text(const Report& report);

}  // namespace factpop
