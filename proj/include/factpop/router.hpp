#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "factpop/dataset_builder.hpp"
#include "factpop/evaluation.hpp"

namespace factpop {

// Selective retrieval: per-relation count thresholds decide whether a
// question goes to the vanilla LM or the retrieval-augmented one.

constexpr uint64_t kInfThreshold = UINT64_MAX;  // serialized as "inf"

struct Thresholds {
  uint64_t theta_sr = 0;
  uint64_t theta_s = 0;
  bool operator==(const Thresholds& o) const {
    return theta_sr == o.theta_sr && theta_s == o.theta_s;
  }
};

struct RouterPolicy {
  std::map<std::string, Thresholds> per_relation;
  Thresholds fallback;  // applies to relations unseen in training

  const Thresholds& for_relation(const std::string& relation_id) const;
};

struct RouteDecision {
  bool retrieve = false;
  uint64_t sr_count = 0;
  uint64_t s_count = 0;
  Thresholds thresholds;
};

// Default direction: retrieve iff sr_count <= theta_sr and s_count <= theta_s
// (the tail-tail region). invert flips the decision.
RouteDecision route(const QAItem& item, const RouterPolicy& policy,
                    bool invert = false);

// qa_id -> answer_correct; failed records are left out of the table.
using CorrectnessTable = std::map<std::string, bool>;
CorrectnessTable correctness_from_records(const std::vector<EvalRecord>& records);

// Exhaustive per-relation grid search over {0} + observed counts + {inf} on
// each axis, maximizing routed accuracy on that relation's training items.
// Ties prefer smaller theta_sr, then smaller theta_s. The fallback is the
// same search over the full training set. Both correctness tables must cover
// every training item.
RouterPolicy learn_thresholds(const std::vector<QAItem>& train_items,
                              const CorrectnessTable& vanilla,
                              const CorrectnessTable& retrieved,
                              bool invert = false);

// Seeded shuffle; first floor(n/2) items train, rest test. Each split keeps
// dataset order.
std::pair<std::vector<QAItem>, std::vector<QAItem>> split_train_test(
    const std::vector<QAItem>& items, uint64_t seed);

struct RoutedEval {
  Report report;  // single "routed" mode
  size_t n = 0;
  size_t correct = 0;
  size_t excluded = 0;  // items missing from a correctness table
  double accuracy = 0.0;
  double retrieval_ratio = 0.0;
};

RoutedEval evaluate_routed(const std::vector<QAItem>& test_items,
                           const RouterPolicy& policy,
                           const CorrectnessTable& vanilla,
                           const CorrectnessTable& retrieved,
                           const BinSpec& bins, uint64_t sr_median,
                           uint64_t s_median, uint64_t seed,
                           bool invert = false, int bootstrap_samples = 1000,
                           double level = 0.95);

struct TrialStats {
  std::vector<double> accuracies;
  std::vector<double> retrieval_ratios;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
};

// Trial t: split with seed base_seed + t, learn on train, evaluate on test.
TrialStats run_routing_trials(const std::vector<QAItem>& items,
                              const CorrectnessTable& vanilla,
                              const CorrectnessTable& retrieved,
                              const BinSpec& bins, int trials,
                              uint64_t base_seed, bool invert = false,
                              int bootstrap_samples = 1000,
                              double level = 0.95);

// policy.tsv: `relation_id <TAB> theta_sr <TAB> theta_s`, one `*` fallback
// row, thresholds printed as integers or "inf".
void save_policy(const std::filesystem::path& path, const RouterPolicy& policy);
RouterPolicy load_policy(const std::filesystem::path& path);

}  // namespace factpop
