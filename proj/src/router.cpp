#include "factpop/router.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "factpop/metrics.hpp"
#include "factpop/util.hpp"

namespace factpop {

const Thresholds& RouterPolicy::for_relation(
    const std::string& relation_id) const {
  auto it = per_relation.find(relation_id);
  return it == per_relation.end() ? fallback : it->second;
}

namespace {

bool decide(uint64_t sr, uint64_t s, const Thresholds& t, bool invert) {
  bool tail_tail = sr <= t.theta_sr && s <= t.theta_s;
  return invert ? !tail_tail : tail_tail;
}

}  // namespace

RouteDecision route(const QAItem& item, const RouterPolicy& policy,
                    bool invert) {
  RouteDecision d;
  d.sr_count = item.sr_count;
  d.s_count = item.s_count;
  d.thresholds = policy.for_relation(item.relation_id);
  d.retrieve = decide(d.sr_count, d.s_count, d.thresholds, invert);
  return d;
}

CorrectnessTable correctness_from_records(
    const std::vector<EvalRecord>& records) {
  CorrectnessTable table;
  for (const EvalRecord& rec : records) {
    if (rec.failed) continue;
    table[rec.qa_id] = rec.answer_correct;
  }
  return table;
}

namespace {

struct TrainItem {
  uint64_t sr = 0;
  uint64_t s = 0;
  bool vanilla_correct = false;
  bool retrieved_correct = false;
};

// Exhaustive search over the grid; first maximum in ascending
// (theta_sr, theta_s) order wins, which is the tie-break.
Thresholds search_cell(const std::vector<TrainItem>& items, bool invert) {
  std::set<uint64_t> sr_grid{0, kInfThreshold};
  std::set<uint64_t> s_grid{0, kInfThreshold};
  for (const TrainItem& it : items) {
    sr_grid.insert(it.sr);
    s_grid.insert(it.s);
  }
  Thresholds best;
  size_t best_correct = 0;
  bool first = true;
  for (uint64_t theta_sr : sr_grid) {
    for (uint64_t theta_s : s_grid) {
      size_t correct = 0;
      for (const TrainItem& it : items) {
        bool retrieve = decide(it.sr, it.s, {theta_sr, theta_s}, invert);
        if (retrieve ? it.retrieved_correct : it.vanilla_correct) ++correct;
      }
      if (first || correct > best_correct) {
        best = {theta_sr, theta_s};
        best_correct = correct;
        first = false;
      }
    }
  }
  return best;
}

}  // namespace

RouterPolicy learn_thresholds(const std::vector<QAItem>& train_items,
                              const CorrectnessTable& vanilla,
                              const CorrectnessTable& retrieved,
                              bool invert) {
  std::map<std::string, std::vector<TrainItem>> by_relation;
  std::vector<TrainItem> all;
  for (const QAItem& item : train_items) {
    auto v = vanilla.find(item.id);
    auto r = retrieved.find(item.id);
    if (v == vanilla.end() || r == retrieved.end()) {
      throw UserError("correctness tables do not cover training item " +
                      item.id);
    }
    TrainItem t{item.sr_count, item.s_count, v->second, r->second};
    by_relation[item.relation_id].push_back(t);
    all.push_back(t);
  }
  if (all.empty()) throw UserError("cannot learn a router from zero items");

  RouterPolicy policy;
  policy.fallback = search_cell(all, invert);
  for (const auto& [relation, items] : by_relation) {
    policy.per_relation[relation] = search_cell(items, invert);
  }
  return policy;
}

std::pair<std::vector<QAItem>, std::vector<QAItem>> split_train_test(
    const std::vector<QAItem>& items, uint64_t seed) {
  std::vector<size_t> idx(items.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(mix_seed(seed, {fnv1a64("train-test-split")}));
  shuffle_indices(idx, rng);

  size_t train_n = items.size() / 2;
  std::vector<size_t> train_idx(idx.begin(), idx.begin() + train_n);
  std::vector<size_t> test_idx(idx.begin() + train_n, idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  std::pair<std::vector<QAItem>, std::vector<QAItem>> out;
  for (size_t i : train_idx) out.first.push_back(items[i]);
  for (size_t i : test_idx) out.second.push_back(items[i]);
  return out;
}

RoutedEval evaluate_routed(const std::vector<QAItem>& test_items,
                           const RouterPolicy& policy,
                           const CorrectnessTable& vanilla,
                           const CorrectnessTable& retrieved,
                           const BinSpec& bins, uint64_t sr_median,
                           uint64_t s_median, uint64_t seed, bool invert,
                           int bootstrap_samples, double level) {
  RoutedEval eval;
  std::vector<EvalRecord> records;
  std::vector<QAItem> covered;
  size_t retrieved_n = 0;
  for (const QAItem& item : test_items) {
    RouteDecision d = route(item, policy, invert);
    const CorrectnessTable& table = d.retrieve ? retrieved : vanilla;
    auto it = table.find(item.id);
    if (it == table.end()) {
      ++eval.excluded;
      continue;
    }
    if (d.retrieve) ++retrieved_n;
    EvalRecord rec;
    rec.qa_id = item.id;
    rec.mode = "routed";
    rec.answer_correct = it->second;
    records.push_back(std::move(rec));
    covered.push_back(item);
    if (it->second) ++eval.correct;
  }
  eval.n = records.size();
  if (eval.n > 0) {
    eval.accuracy =
        static_cast<double>(eval.correct) / static_cast<double>(eval.n);
    eval.retrieval_ratio =
        static_cast<double>(retrieved_n) / static_cast<double>(eval.n);
  }
  eval.report = build_report(records, covered, bins, sr_median, s_median, seed,
                             bootstrap_samples, level);
  return eval;
}

TrialStats run_routing_trials(const std::vector<QAItem>& items,
                              const CorrectnessTable& vanilla,
                              const CorrectnessTable& retrieved,
                              const BinSpec& bins, int trials,
                              uint64_t base_seed, bool invert,
                              int bootstrap_samples, double level) {
  if (trials < 1) throw UserError("trials must be >= 1");

  std::vector<uint64_t> sr_counts, s_counts;
  for (const QAItem& item : items) {
    sr_counts.push_back(item.sr_count);
    s_counts.push_back(item.s_count);
  }
  uint64_t sr_median = lower_median(sr_counts);
  uint64_t s_median = lower_median(s_counts);

  TrialStats stats;
  for (int t = 0; t < trials; ++t) {
    uint64_t seed = base_seed + static_cast<uint64_t>(t);
    auto [train, test] = split_train_test(items, seed);
    RouterPolicy policy = learn_thresholds(train, vanilla, retrieved, invert);
    RoutedEval eval =
        evaluate_routed(test, policy, vanilla, retrieved, bins, sr_median,
                        s_median, seed, invert, bootstrap_samples, level);
    stats.accuracies.push_back(eval.accuracy);
    stats.retrieval_ratios.push_back(eval.retrieval_ratio);
  }

  auto mean = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
  };
  auto sample_std = [&](const std::vector<double>& xs, double m) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  stats.mean_accuracy = mean(stats.accuracies);
  stats.std_accuracy = sample_std(stats.accuracies, stats.mean_accuracy);
  stats.mean_ratio = mean(stats.retrieval_ratios);
  stats.std_ratio = sample_std(stats.retrieval_ratios, stats.mean_ratio);
  return stats;
}

namespace {

std::string threshold_str(uint64_t v) {
  return v == kInfThreshold ? "inf" : std::to_string(v);
}

uint64_t parse_threshold(const std::filesystem::path& path, size_t lineno,
                         const std::string& field) {
  if (field == "inf") return kInfThreshold;
  // stoull accepts a leading '-' and wraps, which would turn a typo into a
  // near-infinite threshold.
  if (field.empty() || field[0] == '-' || field[0] == '+') {
    throw UserError(path.string() + ":" + std::to_string(lineno) +
                    ": bad threshold: " + field);
  }
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw UserError(path.string() + ":" + std::to_string(lineno) +
                    ": bad threshold: " + field);
  }
}

}  // namespace

void save_policy(const std::filesystem::path& path,
                 const RouterPolicy& policy) {
  atomic_write(path, [&](std::ostream& out) {
    out << "*\t" << threshold_str(policy.fallback.theta_sr) << "\t"
        << threshold_str(policy.fallback.theta_s) << "\n";
    for (const auto& [relation, t] : policy.per_relation) {
      out << relation << "\t" << threshold_str(t.theta_sr) << "\t"
          << threshold_str(t.theta_s) << "\n";
    }
  });
}

RouterPolicy load_policy(const std::filesystem::path& path) {
  RouterPolicy policy;
  bool saw_default = false;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3 || cols[0].empty()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected relation<TAB>theta_sr<TAB>theta_s");
    }
    Thresholds t{parse_threshold(path, lineno, cols[1]),
                 parse_threshold(path, lineno, cols[2])};
    if (cols[0] == "*") {
      policy.fallback = t;
      saw_default = true;
    } else if (!policy.per_relation.emplace(cols[0], t).second) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": duplicate relation row " + cols[0]);
    }
  }
  if (!saw_default) {
    throw UserError(path.string() + ": missing default (*) policy row");
  }
  return policy;
}

}  // namespace factpop
