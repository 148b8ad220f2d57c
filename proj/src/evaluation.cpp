#include "factpop/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "factpop/prompts.hpp"
#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"
#include "json.hpp"

namespace factpop {

std::string mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Vanilla: return "vanilla";
    case EvalMode::Bm25: return "bm25";
    case EvalMode::GeneratedContext: return "generated_context";
    case EvalMode::Oracle: return "oracle";
  }
  throw std::logic_error("bad mode");
}

EvalMode mode_from_name(const std::string& name) {
  if (name == "vanilla") return EvalMode::Vanilla;
  if (name == "bm25") return EvalMode::Bm25;
  if (name == "generated_context") return EvalMode::GeneratedContext;
  if (name == "oracle") return EvalMode::Oracle;
  throw UserError("unknown evaluation mode: " + name);
}

namespace {

const char* kRefusalPhrases[] = {
    "i don't know",          "i do not know",
    "unknown",               "the context does not provide",
    "no information",        "cannot be determined",
};

bool looks_like_refusal(const std::string& prediction) {
  std::string norm = normalize_surface(prediction);
  for (const char* phrase : kRefusalPhrases) {
    if (norm.find(phrase) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

EvalRecord predict(const QAItem& item, EvalMode mode, LmClient& lm,
                   const Bm25Index* index, const PredictOptions& opts) {
  EvalRecord rec;
  rec.qa_id = item.id;
  rec.mode = mode_name(mode);

  std::string context;
  switch (mode) {
    case EvalMode::Vanilla:
      break;
    case EvalMode::Bm25: {
      if (!index) throw UserError("bm25 mode requires an index");
      auto results = index->retrieve(item.question, opts.top_k);
      std::vector<std::string> ids;
      for (const RetrievalResult& r : results) {
        if (!context.empty()) context += "\n\n";
        context += r.chunk.text;
        ids.push_back(r.chunk.chunk_id);
      }
      rec.context_used = join(ids, ",");
      break;
    }
    case EvalMode::GeneratedContext: {
      try {
        context = generate_context(item.question, lm, opts.retry);
      } catch (const TransportError&) {
        rec.failed = true;
        rec.passage_correct = false;
        rec.context_used = "generated";
        return rec;
      }
      rec.context_used = "generated";
      break;
    }
    case EvalMode::Oracle: {
      RetrievalResult r = oracle_retrieve(item);
      context = r.chunk.text;
      rec.context_used = r.chunk.chunk_id;
      break;
    }
  }

  std::string prompt;
  if (mode == EvalMode::Vanilla) {
    prompt = opts.compact_templates ? render_vanilla_prompt_compact(item.question)
                                    : render_vanilla_prompt(item.question);
  } else {
    prompt = opts.compact_templates
                 ? render_context_prompt_compact(context, item.question)
                 : render_context_prompt(context, item.question);
    rec.passage_correct = passage_hit(context, item.acceptable_answers);
  }

  try {
    rec.prediction = complete_with_retry(lm, {prompt, 0.0, 256}, opts.retry);
  } catch (const TransportError&) {
    rec.failed = true;
    return rec;
  }
  rec.answer_correct = substring_em(rec.prediction, item.acceptable_answers);
  rec.refusal = looks_like_refusal(rec.prediction);
  return rec;
}

std::vector<EvalRecord> evaluate_dataset(const std::vector<QAItem>& items,
                                         EvalMode mode, LmClient& lm,
                                         const Bm25Index* index,
                                         const PredictOptions& opts,
                                         int workers) {
  std::vector<EvalRecord> records(items.size());
  parallel_for(items.size(), workers, [&](size_t i) {
    records[i] = predict(items[i], mode, lm, index, opts);
  });
  return records;
}

void save_records(const std::filesystem::path& path,
                  const std::vector<EvalRecord>& records) {
  atomic_write(path, [&](std::ostream& out) {
    for (const EvalRecord& rec : records) {
      nlohmann::json j;
      j["qa_id"] = rec.qa_id;
      j["mode"] = rec.mode;
      j["prediction"] = rec.prediction;
      j["answer_correct"] = rec.answer_correct;
      if (rec.passage_correct) j["passage_correct"] = *rec.passage_correct;
      if (rec.context_used) j["context_used"] = *rec.context_used;
      j["failed"] = rec.failed;
      j["refusal"] = rec.refusal;
      out << j.dump() << "\n";
    }
  });
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::vector<EvalRecord> records;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid eval record");
    }
    EvalRecord rec;
    rec.qa_id = j.at("qa_id").get<std::string>();
    rec.mode = j.at("mode").get<std::string>();
    rec.prediction = j.at("prediction").get<std::string>();
    rec.answer_correct = j.at("answer_correct").get<bool>();
    if (j.contains("passage_correct")) {
      rec.passage_correct = j["passage_correct"].get<bool>();
    }
    if (j.contains("context_used")) {
      rec.context_used = j["context_used"].get<std::string>();
    }
    rec.failed = j.value("failed", false);
    rec.refusal = j.value("refusal", false);
    records.push_back(std::move(rec));
  }
  return records;
}

Ci bootstrap_ci(const std::vector<bool>& outcomes, int samples, double level,
                uint64_t seed) {
  if (outcomes.empty()) throw UserError("bootstrap over empty outcomes");
  if (samples < 1) throw UserError("bootstrap needs at least one sample");
  if (!(level > 0.0 && level < 1.0)) {
    throw UserError("bootstrap level must be in (0,1)");
  }
  const size_t n = outcomes.size();
  std::mt19937_64 rng(seed);
  std::vector<double> means(samples);
  for (int s = 0; s < samples; ++s) {
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i) {
      if (outcomes[uniform_below(rng, n)]) ++hits;
    }
    means[s] = static_cast<double>(hits) / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());

  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(means.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= means.size()) return means.back();
    return means[lo] * (1.0 - frac) + means[lo + 1] * frac;
  };
  double alpha = (1.0 - level) / 2.0;
  return Ci{quantile(alpha), quantile(1.0 - alpha)};
}

namespace {

struct Outcomes {
  std::vector<bool> values;
  size_t correct = 0;
};

SliceReport make_slice(const std::string& label, const Outcomes& out,
                       int samples, double level, uint64_t seed) {
  SliceReport slice;
  slice.label = label;
  slice.n = out.values.size();
  slice.correct = out.correct;
  if (!out.values.empty()) {
    slice.accuracy = static_cast<double>(out.correct) /
                     static_cast<double>(out.values.size());
    slice.ci = bootstrap_ci(out.values, samples, level, seed);
  }
  return slice;
}

}  // namespace

Report build_report(const std::vector<EvalRecord>& records,
                    const std::vector<QAItem>& items, const BinSpec& bins,
                    uint64_t sr_median, uint64_t s_median, uint64_t seed,
                    int bootstrap_samples, double level) {
  bins.validate();
  std::map<std::string, const QAItem*> by_id;
  for (const QAItem& item : items) by_id[item.id] = &item;

  std::map<std::string, std::vector<const EvalRecord*>> by_mode;
  for (const EvalRecord& rec : records) by_mode[rec.mode].push_back(&rec);

  const char* kQuadrants[] = {"head-head", "head-tail", "tail-head",
                              "tail-tail"};

  Report report;
  report.sr_median = sr_median;
  report.s_median = s_median;

  for (const auto& [mode, mode_records] : by_mode) {
    ModeReport mr;
    mr.mode = mode;

    Outcomes overall;
    std::vector<Outcomes> per_bin(bins.intervals.size());
    std::map<std::string, Outcomes> per_quadrant;
    for (const char* q : kQuadrants) per_quadrant[q];
    size_t passage_hits = 0, passage_total = 0;
    size_t agree = 0, agree_total = 0;

    for (const EvalRecord* rec : mode_records) {
      auto it = by_id.find(rec->qa_id);
      if (it == by_id.end()) {
        throw UserError("eval record references unknown item: " + rec->qa_id);
      }
      const QAItem& item = *it->second;
      if (rec->refusal) ++mr.refusals;
      if (rec->failed) {
        ++mr.failed;
        continue;
      }
      bool ok = rec->answer_correct;
      overall.values.push_back(ok);
      if (ok) ++overall.correct;

      size_t bin = bins.bin_of(item.sr_count);
      if (bin == BinSpec::npos) {
        throw UserError("item " + item.id + " has S-R count outside all bins");
      }
      per_bin[bin].values.push_back(ok);
      if (ok) ++per_bin[bin].correct;

      PopularityRecord pop{item.s_count, item.sr_count, item.page_views};
      std::string quadrant =
          quadrant_name(classify_quadrant(pop, sr_median, s_median));
      per_quadrant[quadrant].values.push_back(ok);
      if (ok) ++per_quadrant[quadrant].correct;

      if (rec->passage_correct) {
        ++passage_total;
        if (*rec->passage_correct) ++passage_hits;
        ++agree_total;
        if (*rec->passage_correct == ok) ++agree;
      }
    }

    mr.n = overall.values.size();
    mr.correct = overall.correct;
    if (mr.n > 0) {
      mr.accuracy = static_cast<double>(mr.correct) / static_cast<double>(mr.n);
      mr.ci = bootstrap_ci(overall.values, bootstrap_samples, level,
                           mix_seed(seed, {fnv1a64(mode), fnv1a64("overall")}));
    }
    for (size_t i = 0; i < per_bin.size(); ++i) {
      mr.bins.push_back(make_slice(
          bins.intervals[i].label(), per_bin[i], bootstrap_samples, level,
          mix_seed(seed, {fnv1a64(mode), fnv1a64("bin"), i})));
    }
    size_t qi = 0;
    for (const char* q : kQuadrants) {
      mr.quadrants.push_back(make_slice(
          q, per_quadrant[q], bootstrap_samples, level,
          mix_seed(seed, {fnv1a64(mode), fnv1a64("quadrant"), qi})));
      ++qi;
    }
    if (passage_total > 0) {
      mr.passage_accuracy = static_cast<double>(passage_hits) /
                            static_cast<double>(passage_total);
    }
    if (agree_total > 0) {
      mr.agreement_ratio =
          static_cast<double>(agree) / static_cast<double>(agree_total);
    }
    report.modes.push_back(std::move(mr));
  }
  return report;
}

namespace {

nlohmann::json slice_to_json(const SliceReport& slice) {
  return {{"label", slice.label},
          {"n", slice.n},
          {"correct", slice.correct},
          {"accuracy", slice.accuracy},
          {"ci_low", slice.ci.low},
          {"ci_high", slice.ci.high}};
}

}  // namespace

std::string report_to_json(const Report& report) {
  nlohmann::json j;
  j["sr_median"] = report.sr_median;
  j["s_median"] = report.s_median;
  nlohmann::json modes = nlohmann::json::array();
  for (const ModeReport& mr : report.modes) {
    nlohmann::json m;
    m["mode"] = mr.mode;
    m["n"] = mr.n;
    m["correct"] = mr.correct;
    m["failed"] = mr.failed;
    m["refusals"] = mr.refusals;
    m["accuracy"] = mr.accuracy;
    m["ci_low"] = mr.ci.low;
    m["ci_high"] = mr.ci.high;
    nlohmann::json bins = nlohmann::json::array();
    for (const SliceReport& s : mr.bins) bins.push_back(slice_to_json(s));
    m["bins"] = std::move(bins);
    nlohmann::json quads = nlohmann::json::array();
    for (const SliceReport& s : mr.quadrants) quads.push_back(slice_to_json(s));
    m["quadrants"] = std::move(quads);
    if (mr.passage_accuracy) m["passage_accuracy"] = *mr.passage_accuracy;
    if (mr.agreement_ratio) m["agreement_ratio"] = *mr.agreement_ratio;
    modes.push_back(std::move(m));
  }
  j["modes"] = std::move(modes);
  return j.dump(2) + "\n";
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", v * 100.0);
  return buf;
}

std::string ci_str(const Ci& ci) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "[%.3f, %.3f]", ci.low, ci.high);
  return buf;
}

}  // namespace

std::string report_to_text(const Report& report) {
  std::ostringstream out;
  out << "medians: sr=" << report.sr_median << " s=" << report.s_median << "\n";
  for (const ModeReport& mr : report.modes) {
    out << "\n== " << mr.mode << " ==\n";
    out << "overall: " << mr.correct << "/" << mr.n;
    if (mr.n > 0) out << " (" << pct(mr.accuracy) << ", ci " << ci_str(mr.ci) << ")";
    out << ", failed " << mr.failed << ", refusals " << mr.refusals << "\n";
    if (mr.passage_accuracy) {
      out << "passage accuracy: " << pct(*mr.passage_accuracy) << "\n";
    }
    if (mr.agreement_ratio) {
      out << "agreement ratio: " << pct(*mr.agreement_ratio) << "\n";
    }
    out << "bins:\n";
    for (const SliceReport& s : mr.bins) {
      out << "  " << s.label << ": ";
      if (s.n == 0) {
        out << "-\n";
        continue;
      }
      out << s.correct << "/" << s.n << " (" << pct(s.accuracy) << ", ci "
          << ci_str(s.ci) << ")\n";
    }
    out << "quadrants:\n";
    for (const SliceReport& s : mr.quadrants) {
      out << "  " << s.label << ": ";
      if (s.n == 0) {
        out << "-\n";
        continue;
      }
      out << s.correct << "/" << s.n << " (" << pct(s.accuracy) << ", ci "
          << ci_str(s.ci) << ")\n";
    }
  }
  return out.str();
}

}  // namespace factpop
