#include "factpop/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "factpop/corpus_ingest.hpp"
#include "factpop/evaluation.hpp"
#include "factpop/kb_store.hpp"
#include "factpop/metrics.hpp"
#include "factpop/popularity.hpp"
#include "factpop/retrieval.hpp"
#include "factpop/router.hpp"
#include "factpop/util.hpp"
#include "json.hpp"

namespace factpop {

namespace fs = std::filesystem;

const std::vector<std::string> kStageNames = {
    "extract",      "count",       "select-passages", "sample",
    "expand-answers", "genq",      "build-index",     "evaluate",
    "learn-router", "route-evaluate", "report"};

namespace {

// Fields that change what the pipeline computes. Client identity is excluded:
// file-based mock rules are content-hashed as stage inputs instead, and live
// endpoints cannot be hashed at all. Concurrency never changes outputs.
nlohmann::json hashed_config(const PipelineConfig& c) {
  nlohmann::json j;
  j["relations"] = c.relations;
  j["bin_edges"] = c.bin_edges;
  j["cap"] = c.cap;
  j["roundtrip_k"] = c.roundtrip_k;
  j["chunk_size"] = c.chunk_size;
  j["chunk_overlap"] = c.chunk_overlap;
  j["bm25_k1"] = c.bm25_k1;
  j["bm25_b"] = c.bm25_b;
  j["top_k"] = c.top_k;
  j["bootstrap_samples"] = c.bootstrap_samples;
  j["bootstrap_level"] = c.bootstrap_level;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["subject_is_page"] = c.subject_is_page;
  j["count_distinct_triples"] = c.count_distinct_triples;
  j["screen_answer_aliases"] = c.screen_answer_aliases;
  j["compact_templates"] = c.compact_templates;
  j["invert_routing"] = c.invert_routing;
  return j;
}

nlohmann::json canonical_config(const PipelineConfig& c) {
  nlohmann::json j;
  j["entities_tsv"] = c.entities_tsv;
  j["relations_tsv"] = c.relations_tsv;
  j["triples_tsv"] = c.triples_tsv;
  j["dump"] = c.dump;
  j["title_map"] = c.title_map;
  j["page_views"] = c.page_views;
  j["out_dir"] = c.out_dir;
  j["relations"] = c.relations;
  j["bin_edges"] = c.bin_edges;
  j["cap"] = c.cap;
  j["roundtrip_k"] = c.roundtrip_k;
  j["chunk_size"] = c.chunk_size;
  j["chunk_overlap"] = c.chunk_overlap;
  j["bm25_k1"] = c.bm25_k1;
  j["bm25_b"] = c.bm25_b;
  j["top_k"] = c.top_k;
  j["bootstrap_samples"] = c.bootstrap_samples;
  j["bootstrap_level"] = c.bootstrap_level;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["max_concurrent_requests"] = c.max_concurrent_requests;
  j["subject_is_page"] = c.subject_is_page;
  j["count_distinct_triples"] = c.count_distinct_triples;
  j["screen_answer_aliases"] = c.screen_answer_aliases;
  j["compact_templates"] = c.compact_templates;
  j["invert_routing"] = c.invert_routing;
  j["lm_endpoint"] = c.lm_endpoint;
  j["lm_key"] = c.lm_key;
  j["lm_model"] = c.lm_model;
  j["nli_endpoint"] = c.nli_endpoint;
  j["mock_lm"] = c.mock_lm;
  j["mock_nli"] = c.mock_nli;
  return j;
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw UserError("config is not a JSON object: " + path.string());
  }
  PipelineConfig c;
  std::set<std::string> known;
  const nlohmann::json canon = canonical_config(c);
  for (const auto& [key, value] : canon.items()) {
    known.insert(key);
    (void)value;
  }
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw UserError("unknown config key '" + key + "' in " + path.string());
    }
    (void)value;
  }

  auto str = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = j[key].get<std::string>();
  };
  str("entities_tsv", c.entities_tsv);
  str("relations_tsv", c.relations_tsv);
  str("triples_tsv", c.triples_tsv);
  str("dump", c.dump);
  str("title_map", c.title_map);
  str("page_views", c.page_views);
  str("out_dir", c.out_dir);
  str("lm_endpoint", c.lm_endpoint);
  str("lm_key", c.lm_key);
  str("lm_model", c.lm_model);
  str("nli_endpoint", c.nli_endpoint);
  str("mock_lm", c.mock_lm);
  str("mock_nli", c.mock_nli);
  if (j.contains("relations")) {
    c.relations = j["relations"].get<std::vector<std::string>>();
  }
  if (j.contains("bin_edges")) {
    c.bin_edges = j["bin_edges"].get<std::vector<uint64_t>>();
  }
  if (j.contains("cap")) c.cap = j["cap"].get<uint64_t>();
  if (j.contains("roundtrip_k")) c.roundtrip_k = j["roundtrip_k"].get<int>();
  if (j.contains("chunk_size")) c.chunk_size = j["chunk_size"].get<int>();
  if (j.contains("chunk_overlap")) {
    c.chunk_overlap = j["chunk_overlap"].get<int>();
  }
  if (j.contains("bm25_k1")) c.bm25_k1 = j["bm25_k1"].get<double>();
  if (j.contains("bm25_b")) c.bm25_b = j["bm25_b"].get<double>();
  if (j.contains("top_k")) c.top_k = j["top_k"].get<int>();
  if (j.contains("bootstrap_samples")) {
    c.bootstrap_samples = j["bootstrap_samples"].get<int>();
  }
  if (j.contains("bootstrap_level")) {
    c.bootstrap_level = j["bootstrap_level"].get<double>();
  }
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("trials")) c.trials = j["trials"].get<int>();
  if (j.contains("max_concurrent_requests")) {
    c.max_concurrent_requests = j["max_concurrent_requests"].get<int>();
  }
  auto flag = [&](const char* key, bool& out) {
    if (j.contains(key)) out = j[key].get<bool>();
  };
  flag("subject_is_page", c.subject_is_page);
  flag("count_distinct_triples", c.count_distinct_triples);
  flag("screen_answer_aliases", c.screen_answer_aliases);
  flag("compact_templates", c.compact_templates);
  flag("invert_routing", c.invert_routing);
  return c;
}

BinSpec PipelineConfig::bin_spec() const {
  if (bin_edges.empty()) throw UserError("bin_edges must not be empty");
  BinSpec spec;
  for (size_t i = 0; i < bin_edges.size(); ++i) {
    uint64_t hi = i + 1 < bin_edges.size() ? bin_edges[i + 1] : UINT64_MAX;
    spec.intervals.push_back(Interval{bin_edges[i], hi});
  }
  spec.cap = cap;
  spec.validate();
  return spec;
}

uint64_t PipelineConfig::config_hash() const {
  return fnv1a64(hashed_config(*this).dump());
}

std::string producing_stage(const std::string& artifact) {
  static const std::map<std::string, std::string> kProducers = {
      {"passages.jsonl", "extract"},
      {"instances.tsv", "extract"},
      {"counts_sr.tsv", "count"},
      {"counts_s.tsv", "count"},
      {"supporting.tsv", "select-passages"},
      {"sampled.tsv", "sample"},
      {"answers.jsonl", "expand-answers"},
      {"dataset.jsonl", "genq"},
      {"human_queue.jsonl", "genq"},
      {"index", "build-index"},
      {"policy.tsv", "learn-router"},
      {"router_train.json", "learn-router"},
      {"routed.json", "route-evaluate"},
      {"report.json", "report"},
      {"report.txt", "report"},
  };
  auto it = kProducers.find(artifact);
  if (it != kProducers.end()) return it->second;
  if (artifact.rfind("records_", 0) == 0) return "evaluate";
  throw std::logic_error("unknown artifact: " + artifact);
}

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  if (!fallback.empty()) return fallback;
  const char* v = std::getenv(name);
  return v ? v : "";
}

// Content hash of an artifact; directories hash their files in sorted order.
uint64_t artifact_hash(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::string digest;
    for (const fs::path& f : files) {
      digest += f.filename().string();
      digest += ":";
      digest += hex64(file_fnv(f));
      digest += "\n";
    }
    return fnv1a64(digest);
  }
  return file_fnv(path);
}

class StageRun {
 public:
  StageRun(std::string stage, const PipelineConfig& config, bool force)
      : stage_(std::move(stage)), config_(config), force_(force) {
    out_ = fs::path(config.out_dir);
  }

  fs::path out(const std::string& name) const { return out_ / name; }

  // External input file: must exist; recorded in the manifest.
  fs::path external(const std::string& path) {
    if (path.empty() || !fs::exists(path)) {
      throw UserError("stage '" + stage_ + "' needs input file '" + path +
                      "', which does not exist");
    }
    inputs_.push_back(path);
    return path;
  }

  // Upstream artifact: must exist, be tracked by its producer's manifest,
  // match that manifest's hashes, and come from the same config.
  fs::path artifact(const std::string& name) {
    fs::path path = out_ / name;
    std::string producer = producing_stage(name);
    if (!fs::exists(path)) {
      throw UserError("missing artifact '" + name + "' (produced by stage '" +
                      producer + "'); run `factpop " + producer + "` first");
    }
    fs::path manifest_path = out_ / (producer + ".manifest.json");
    if (!fs::exists(manifest_path)) {
      refuse_unless_forced("artifact '" + name + "' has no manifest from stage '" +
                           producer + "'");
    } else {
      nlohmann::json manifest =
          nlohmann::json::parse(read_file(manifest_path), nullptr, false);
      if (manifest.is_discarded()) {
        refuse_unless_forced("manifest for stage '" + producer +
                             "' is unreadable");
      } else {
        std::string want = hex64(config_.config_hash());
        std::string got = manifest.value("config_hash", std::string());
        if (got != want) {
          refuse_unless_forced("artifact '" + name +
                               "' is stale: config changed since stage '" +
                               producer + "' ran");
        }
        auto outputs = manifest.value("outputs", nlohmann::json::object());
        if (outputs.contains(name) &&
            outputs[name].get<std::string>() != hex64(artifact_hash(path))) {
          refuse_unless_forced("artifact '" + name +
                               "' was modified after stage '" + producer +
                               "' wrote it");
        }
      }
    }
    inputs_.push_back(path);
    return path;
  }

  void add_output(const std::string& name) { outputs_.push_back(name); }

  void write_manifest() {
    nlohmann::json manifest;
    manifest["stage"] = stage_;
    manifest["config_hash"] = hex64(config_.config_hash());
    nlohmann::json inputs = nlohmann::json::object();
    for (const fs::path& p : inputs_) {
      inputs[p.filename().string()] = hex64(artifact_hash(p));
    }
    manifest["inputs"] = std::move(inputs);
    nlohmann::json outputs = nlohmann::json::object();
    for (const std::string& name : outputs_) {
      outputs[name] = hex64(artifact_hash(out_ / name));
    }
    manifest["outputs"] = std::move(outputs);
    atomic_write(out_ / (stage_ + ".manifest.json"), [&](std::ostream& os) {
      os << manifest.dump(2) << "\n";
    });
  }

 private:
  void refuse_unless_forced(const std::string& why) {
    if (force_) {
      std::cerr << "warning: " << why << " (continuing under --force)\n";
      return;
    }
    throw UserError(why + "; rerun the producing stage or pass --force");
  }

  std::string stage_;
  const PipelineConfig& config_;
  bool force_;
  fs::path out_;
  std::vector<fs::path> inputs_;
  std::vector<std::string> outputs_;
};

KbStore load_kb(StageRun& run, const PipelineConfig& config) {
  return KbStore::load(run.external(config.entities_tsv),
                       run.external(config.relations_tsv),
                       run.external(config.triples_tsv));
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", score);
  return buf;
}

// -------------------------------------------------------------------------
// stages

void stage_extract(const PipelineConfig& config, const RunOptions& options) {
  StageRun run("extract", config, options.force);
  KbStore kb = load_kb(run, config);
  IngestResult ingest = ingest_pages(run.external(config.dump),
                                     run.external(config.title_map));
  ExtractOptions opts;
  opts.subject_is_page = config.subject_is_page;
  std::vector<TripleInstance> instances =
      extract_triples(ingest.passages, kb, opts);

  save_passages(run.out("passages.jsonl"), ingest.passages);
  run.add_output("passages.jsonl");
  save_instances(run.out("instances.tsv"), instances);
  run.add_output("instances.tsv");
  run.write_manifest();

  std::cout << "extract: " << ingest.stats.pages << " pages, "
            << ingest.stats.resolved_mentions << " mentions ("
            << ingest.stats.unresolved_anchors << " unresolved anchors), "
            << instances.size() << " triple instances\n";
  if (kb.stats().dropped_triples > 0) {
    std::cout << "extract: KB dropped " << kb.stats().dropped_triples
              << " dangling triples\n";
  }
}

void stage_count(const PipelineConfig& config, const RunOptions& options) {
  StageRun run("count", config, options.force);
  auto instances = load_instances(run.artifact("instances.tsv"));
  CountIndex counts = CountIndex::build(instances, config.count_distinct_triples);
  counts.save(run.out("counts_sr.tsv"), run.out("counts_s.tsv"));
  run.add_output("counts_sr.tsv");
  run.add_output("counts_s.tsv");
  run.write_manifest();
  std::cout << "count: " << counts.all_s_counts().size() << " subjects, "
            << counts.all_sr_counts().size() << " subject-relation pairs\n";
}

void stage_select_passages(const PipelineConfig& config,
                           const RunOptions& options) {
  StageRun run("select-passages", config, options.force);
  KbStore kb = load_kb(run, config);
  auto passages = load_passages(run.artifact("passages.jsonl"));
  auto instances = load_instances(run.artifact("instances.tsv"));
  if (!config.mock_nli.empty() && config.mock_nli != "lexical") {
    run.external(config.mock_nli);
  }
  auto scorer = make_nli_client(config);

  std::map<int64_t, const PassageRecord*> by_page;
  for (const PassageRecord& p : passages) by_page[p.page_id] = &p;

  std::map<Triple, std::set<int64_t>> candidate_pages;
  for (const TripleInstance& inst : instances) {
    candidate_pages[inst.triple].insert(inst.page_id);
  }

  atomic_write(run.out("supporting.tsv"), [&](std::ostream& out) {
    for (const auto& [triple, pages] : candidate_pages) {
      const Entity* subject = kb.find_entity(triple.subject);
      const Relation* relation = kb.find_relation(triple.relation);
      const Entity* object = kb.find_entity(triple.object);
      if (!subject || !relation || !object) {
        throw UserError("instance references ids missing from the KB: " +
                        triple_id(triple));
      }
      std::vector<const PassageRecord*> candidates;
      for (int64_t page : pages) {
        auto it = by_page.find(page);
        if (it == by_page.end()) {
          throw UserError("instances reference page " + std::to_string(page) +
                          " absent from passages.jsonl; rerun extract");
        }
        candidates.push_back(it->second);
      }
      PassageChoice choice =
          select_supporting_passage(subject->label, relation->label,
                                    object->label, candidates, *scorer);
      out << triple.subject << "\t" << triple.relation << "\t" << triple.object
          << "\t" << choice.passage->page_id << "\t"
          << format_score(choice.score) << "\n";
    }
  });
  run.add_output("supporting.tsv");
  run.write_manifest();
  std::cout << "select-passages: " << candidate_pages.size()
            << " triples scored\n";
}

std::map<std::string, int64_t> load_supporting(const fs::path& path) {
  std::map<std::string, int64_t> by_triple;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 5) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected s<TAB>r<TAB>o<TAB>page<TAB>score");
    }
    by_triple[cols[0] + "|" + cols[1] + "|" + cols[2]] = std::stoll(cols[3]);
  }
  return by_triple;
}

std::vector<Triple> load_sampled(const fs::path& path) {
  std::vector<Triple> triples;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": expected s<TAB>r<TAB>o");
    }
    triples.push_back(Triple{cols[0], cols[1], cols[2]});
  }
  return triples;
}

void stage_sample(const PipelineConfig& config, const RunOptions& options) {
  StageRun run("sample", config, options.force);
  auto instances = load_instances(run.artifact("instances.tsv"));
  CountIndex counts = CountIndex::load(run.artifact("counts_sr.tsv"),
                                       run.artifact("counts_s.tsv"));

  std::vector<std::string> relations = config.relations;
  if (relations.empty()) {
    KbStore kb = load_kb(run, config);
    std::set<std::string> ids;
    for (const Triple& t : kb.triples()) ids.insert(t.relation);
    relations.assign(ids.begin(), ids.end());
  }

  std::set<Triple> distinct;
  for (const TripleInstance& inst : instances) distinct.insert(inst.triple);
  std::vector<Triple> triples(distinct.begin(), distinct.end());

  std::vector<Triple> sampled =
      sample_triples(counts, triples, relations, config.bin_spec(), config.seed);
  atomic_write(run.out("sampled.tsv"), [&](std::ostream& out) {
    for (const Triple& t : sampled) {
      out << t.subject << "\t" << t.relation << "\t" << t.object << "\n";
    }
  });
  run.add_output("sampled.tsv");
  run.write_manifest();
  std::cout << "sample: " << sampled.size() << " of " << triples.size()
            << " distinct triples\n";
}

void stage_expand_answers(const PipelineConfig& config,
                          const RunOptions& options) {
  StageRun run("expand-answers", config, options.force);
  KbStore kb = load_kb(run, config);
  auto sampled = load_sampled(run.artifact("sampled.tsv"));
  atomic_write(run.out("answers.jsonl"), [&](std::ostream& out) {
    for (const Triple& t : sampled) {
      nlohmann::json rec{{"id", triple_id(t)},
                         {"answers", kb.answers_for(t.object)}};
      out << rec.dump() << "\n";
    }
  });
  run.add_output("answers.jsonl");
  run.write_manifest();
  std::cout << "expand-answers: " << sampled.size() << " triples\n";
}

std::map<std::string, std::vector<std::string>> load_answer_sets(
    const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid answers record");
    }
    out[rec.at("id").get<std::string>()] =
        rec.at("answers").get<std::vector<std::string>>();
  }
  return out;
}

void stage_genq(const PipelineConfig& config, const RunOptions& options) {
  StageRun run("genq", config, options.force);
  KbStore kb = load_kb(run, config);
  auto sampled = load_sampled(run.artifact("sampled.tsv"));
  auto supporting = load_supporting(run.artifact("supporting.tsv"));
  auto passages = load_passages(run.artifact("passages.jsonl"));
  auto answer_sets = load_answer_sets(run.artifact("answers.jsonl"));
  CountIndex counts = CountIndex::load(run.artifact("counts_sr.tsv"),
                                       run.artifact("counts_s.tsv"));
  if (!config.mock_lm.empty() && config.mock_lm != "extractive") {
    run.external(config.mock_lm);
  }
  auto lm = make_lm_client(config, nullptr);

  std::unique_ptr<FilePageViewClient> views;
  if (!config.page_views.empty()) {
    views = std::make_unique<FilePageViewClient>(
        run.external(config.page_views).string());
  }

  std::map<int64_t, const PassageRecord*> by_page;
  for (const PassageRecord& p : passages) by_page[p.page_id] = &p;

  struct Slot {
    std::optional<QAItem> item;
    std::optional<HumanQueueEntry> queue;
  };
  std::vector<Slot> slots(sampled.size());

  RoundTripOptions rt;
  rt.k = config.roundtrip_k;
  rt.screen_answer_aliases = config.screen_answer_aliases;

  parallel_for(sampled.size(), config.max_concurrent_requests, [&](size_t i) {
    const Triple& t = sampled[i];
    const Entity* subject = kb.find_entity(t.subject);
    const Relation* relation = kb.find_relation(t.relation);
    const Entity* object = kb.find_entity(t.object);
    if (!subject || !relation || !object) {
      throw UserError("sampled triple references unknown ids: " + triple_id(t));
    }
    auto sup = supporting.find(triple_id(t));
    if (sup == supporting.end()) {
      throw UserError("no supporting passage for " + triple_id(t) +
                      "; rerun select-passages");
    }
    auto page = by_page.find(sup->second);
    if (page == by_page.end()) {
      throw UserError("supporting page " + std::to_string(sup->second) +
                      " missing from passages.jsonl");
    }
    auto answers = answer_sets.find(triple_id(t));
    if (answers == answer_sets.end()) {
      throw UserError("no answer set for " + triple_id(t) +
                      "; rerun expand-answers");
    }

    QAItem skeleton;
    skeleton.id = triple_id(t);
    skeleton.subject_id = t.subject;
    skeleton.subject_label = subject->label;
    skeleton.relation_id = t.relation;
    skeleton.relation_label = relation->label;
    skeleton.object_id = t.object;
    skeleton.object_label = object->label;
    skeleton.acceptable_answers = answers->second;
    skeleton.passage_text = page->second->text;
    skeleton.passage_page_id = page->second->page_id;
    skeleton.s_count = counts.s_count(t.subject);
    skeleton.sr_count = counts.sr_count(t.subject, t.relation);
    if (views) {
      skeleton.page_views = fetch_page_views(subject->label, *views);
    }

    RoundTripResult result = generate_question_roundtrip(
        subject->label, relation->label, relation->description, object->label,
        skeleton.passage_text, skeleton.acceptable_answers, *lm, rt);
    if (result.accepted) {
      skeleton.question = result.question;
      skeleton.provenance = result.provenance;
      slots[i].item = std::move(skeleton);
    } else {
      skeleton.provenance = "human";
      slots[i].queue = HumanQueueEntry{std::move(skeleton), result.transcript};
    }
  });

  std::vector<QAItem> items;
  std::vector<HumanQueueEntry> queue;
  for (Slot& slot : slots) {
    if (slot.item) items.push_back(std::move(*slot.item));
    if (slot.queue) queue.push_back(std::move(*slot.queue));
  }

  if (!options.human_rewrites.empty()) {
    std::map<std::string, std::string> rewrites;
    fs::path rw = run.external(options.human_rewrites);
    size_t lineno = 0;
    for (const std::string& line : read_lines(rw)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.contains("id") || !rec.contains("question")) {
        throw UserError(rw.string() + ":" + std::to_string(lineno) +
                        ": expected {id, question}");
      }
      rewrites[rec["id"].get<std::string>()] =
          rec["question"].get<std::string>();
    }
    std::vector<std::string> rejects;
    std::vector<QAItem> humans =
        import_human_questions(queue, rewrites, *lm, rt, &rejects);
    std::set<std::string> imported;
    for (const QAItem& item : humans) imported.insert(item.id);
    std::vector<HumanQueueEntry> rest;
    for (HumanQueueEntry& entry : queue) {
      if (!imported.count(entry.skeleton.id)) rest.push_back(std::move(entry));
    }
    queue = std::move(rest);
    for (QAItem& item : humans) items.push_back(std::move(item));
    for (const std::string& why : rejects) {
      std::cerr << "warning: human rewrite rejected: " << why << "\n";
    }
    // Keep dataset order aligned with the sampled triple order.
    std::map<std::string, size_t> order;
    for (size_t i = 0; i < sampled.size(); ++i) order[triple_id(sampled[i])] = i;
    std::sort(items.begin(), items.end(), [&](const QAItem& a, const QAItem& b) {
      return order.at(a.id) < order.at(b.id);
    });
  }

  std::vector<std::string> rejects;
  export_dataset(items, run.out("dataset.jsonl"), &rejects);
  run.add_output("dataset.jsonl");
  export_human_queue(queue, run.out("human_queue.jsonl"));
  run.add_output("human_queue.jsonl");
  run.write_manifest();

  for (const std::string& why : rejects) {
    std::cerr << "warning: dataset item rejected: " << why << "\n";
  }
  std::cout << "genq: " << items.size() - rejects.size() << " questions, "
            << queue.size() << " queued for annotators, " << rejects.size()
            << " rejected\n";
}

void stage_build_index(const PipelineConfig& config,
                       const RunOptions& options) {
  StageRun run("build-index", config, options.force);
  auto passages = load_passages(run.artifact("passages.jsonl"));
  Bm25Index::Params params;
  params.k1 = config.bm25_k1;
  params.b = config.bm25_b;
  params.chunk_size = config.chunk_size;
  params.chunk_overlap = config.chunk_overlap;
  auto chunks = chunk_corpus(passages, config.chunk_size, config.chunk_overlap);
  Bm25Index index = Bm25Index::build(std::move(chunks), params);
  index.save(run.out("index"));
  run.add_output("index");
  run.write_manifest();
  std::cout << "build-index: " << index.doc_count() << " chunks\n";
}

void stage_evaluate(const PipelineConfig& config, const RunOptions& options) {
  if (options.mode.empty()) {
    throw UserError("evaluate needs --mode "
                    "(vanilla|bm25|generated_context|oracle)");
  }
  EvalMode mode = mode_from_name(options.mode);

  StageRun run("evaluate", config, options.force);
  auto items = import_dataset(run.artifact("dataset.jsonl"));

  std::optional<Bm25Index> index;
  if (mode == EvalMode::Bm25) {
    index = Bm25Index::load(run.artifact("index"));
  }

  if (!config.mock_lm.empty() && config.mock_lm != "extractive") {
    run.external(config.mock_lm);
  }
  auto lm = make_lm_client(config, &items);
  PredictOptions opts;
  opts.top_k = config.top_k;
  opts.compact_templates = config.compact_templates;

  auto records =
      evaluate_dataset(items, mode, *lm, index ? &*index : nullptr, opts,
                       config.max_concurrent_requests);
  std::string name = "records_" + options.mode + ".jsonl";
  save_records(run.out(name), records);
  run.add_output(name);
  run.write_manifest();

  size_t correct = 0, failed = 0;
  for (const EvalRecord& rec : records) {
    if (rec.failed) ++failed;
    else if (rec.answer_correct) ++correct;
  }
  std::cout << "evaluate[" << options.mode << "]: " << correct << "/"
            << records.size() - failed << " correct, " << failed
            << " failed\n";
}

struct RouterInputs {
  std::vector<QAItem> items;
  CorrectnessTable vanilla;
  CorrectnessTable retrieved;
  uint64_t sr_median = 0;
  uint64_t s_median = 0;
};

RouterInputs load_router_inputs(StageRun& run, const RunOptions& options) {
  RouterInputs in;
  in.items = import_dataset(run.artifact("dataset.jsonl"));
  in.vanilla =
      correctness_from_records(load_records(run.artifact("records_vanilla.jsonl")));
  in.retrieved = correctness_from_records(
      load_records(run.artifact(options.retrieved_records)));
  std::vector<uint64_t> sr, s;
  for (const QAItem& item : in.items) {
    sr.push_back(item.sr_count);
    s.push_back(item.s_count);
  }
  in.sr_median = lower_median(sr);
  in.s_median = lower_median(s);
  return in;
}

void stage_learn_router(const PipelineConfig& config,
                        const RunOptions& options) {
  StageRun run("learn-router", config, options.force);
  RouterInputs in = load_router_inputs(run, options);

  auto [train, test] = split_train_test(in.items, config.seed);
  RouterPolicy policy = learn_thresholds(train, in.vanilla, in.retrieved,
                                         config.invert_routing);
  save_policy(run.out("policy.tsv"), policy);
  run.add_output("policy.tsv");

  RoutedEval train_eval = evaluate_routed(
      train, policy, in.vanilla, in.retrieved, config.bin_spec(), in.sr_median,
      in.s_median, config.seed, config.invert_routing,
      config.bootstrap_samples, config.bootstrap_level);
  nlohmann::json summary;
  summary["seed"] = config.seed;
  summary["invert_routing"] = config.invert_routing;
  summary["retrieved_records"] = options.retrieved_records;
  summary["train_n"] = train.size();
  summary["test_n"] = test.size();
  summary["train_accuracy"] = train_eval.accuracy;
  summary["train_retrieval_ratio"] = train_eval.retrieval_ratio;
  atomic_write(run.out("router_train.json"), [&](std::ostream& out) {
    out << summary.dump(2) << "\n";
  });
  run.add_output("router_train.json");
  run.write_manifest();
  std::cout << "learn-router: train accuracy "
            << format_score(train_eval.accuracy) << ", retrieval ratio "
            << format_score(train_eval.retrieval_ratio) << "\n";
}

void stage_route_evaluate(const PipelineConfig& config,
                          const RunOptions& options) {
  StageRun run("route-evaluate", config, options.force);
  RouterInputs in = load_router_inputs(run, options);

  nlohmann::json out_json;
  out_json["invert_routing"] = config.invert_routing;
  out_json["retrieved_records"] = options.retrieved_records;
  if (config.trials <= 1) {
    RouterPolicy policy = load_policy(run.artifact("policy.tsv"));
    auto [train, test] = split_train_test(in.items, config.seed);
    RoutedEval eval = evaluate_routed(
        test, policy, in.vanilla, in.retrieved, config.bin_spec(),
        in.sr_median, in.s_median, config.seed, config.invert_routing,
        config.bootstrap_samples, config.bootstrap_level);
    out_json["seed"] = config.seed;
    out_json["n"] = eval.n;
    out_json["correct"] = eval.correct;
    out_json["excluded"] = eval.excluded;
    out_json["accuracy"] = eval.accuracy;
    out_json["retrieval_ratio"] = eval.retrieval_ratio;
    out_json["report"] =
        nlohmann::json::parse(report_to_json(eval.report));
    std::cout << "route-evaluate: accuracy " << format_score(eval.accuracy)
              << ", retrieval ratio " << format_score(eval.retrieval_ratio)
              << "\n";
  } else {
    TrialStats stats = run_routing_trials(
        in.items, in.vanilla, in.retrieved, config.bin_spec(), config.trials,
        config.seed, config.invert_routing, config.bootstrap_samples,
        config.bootstrap_level);
    out_json["base_seed"] = config.seed;
    out_json["trials"] = config.trials;
    out_json["accuracies"] = stats.accuracies;
    out_json["retrieval_ratios"] = stats.retrieval_ratios;
    out_json["mean_accuracy"] = stats.mean_accuracy;
    out_json["std_accuracy"] = stats.std_accuracy;
    out_json["mean_retrieval_ratio"] = stats.mean_ratio;
    out_json["std_retrieval_ratio"] = stats.std_ratio;
    std::cout << "route-evaluate: mean accuracy "
              << format_score(stats.mean_accuracy) << " over "
              << config.trials << " trials\n";
  }
  atomic_write(run.out("routed.json"), [&](std::ostream& out) {
    out << out_json.dump(2) << "\n";
  });
  run.add_output("routed.json");
  run.write_manifest();
}

void stage_report(const PipelineConfig& config, const RunOptions& options) {
  StageRun run("report", config, options.force);
  auto items = import_dataset(run.artifact("dataset.jsonl"));

  std::vector<EvalRecord> records;
  const char* kModes[] = {"vanilla", "bm25", "generated_context", "oracle"};
  for (const char* mode : kModes) {
    std::string name = std::string("records_") + mode + ".jsonl";
    if (!fs::exists(fs::path(config.out_dir) / name)) continue;
    auto mode_records = load_records(run.artifact(name));
    records.insert(records.end(), mode_records.begin(), mode_records.end());
  }
  if (records.empty()) {
    throw UserError("report needs at least one records_<mode>.jsonl; run "
                    "`factpop evaluate` first");
  }

  std::vector<uint64_t> sr, s;
  for (const QAItem& item : items) {
    sr.push_back(item.sr_count);
    s.push_back(item.s_count);
  }
  Report report =
      build_report(records, items, config.bin_spec(), lower_median(sr),
                   lower_median(s), config.seed, config.bootstrap_samples,
                   config.bootstrap_level);
  atomic_write(run.out("report.json"),
               [&](std::ostream& out) { out << report_to_json(report); });
  run.add_output("report.json");
  atomic_write(run.out("report.txt"),
               [&](std::ostream& out) { out << report_to_text(report); });
  run.add_output("report.txt");
  run.write_manifest();
  std::cout << "report: " << report.modes.size() << " modes\n";
}

}  // namespace

std::unique_ptr<LmClient> make_lm_client(const PipelineConfig& config,
                                         const std::vector<QAItem>* items) {
  if (config.mock_lm == "extractive") {
    if (!items) {
      throw UserError("the extractive mock is only usable at evaluation time");
    }
    std::map<std::string, std::vector<std::string>> answers;
    for (const QAItem& item : *items) {
      answers[item.question] = item.acceptable_answers;
    }
    return std::make_unique<ExtractiveReader>(std::move(answers));
  }
  if (!config.mock_lm.empty()) {
    return ScriptedLmClient::from_file(config.mock_lm);
  }
  std::string endpoint = env_or("FACTPOP_LM_ENDPOINT", config.lm_endpoint);
  if (endpoint.empty()) {
    throw UserError("no language model configured: set lm_endpoint (or "
                    "FACTPOP_LM_ENDPOINT) or pass --mock-lm");
  }
  std::string key = env_or("FACTPOP_LM_KEY", config.lm_key);
  return std::make_unique<HttpLmClient>(endpoint, key, config.lm_model);
}

std::unique_ptr<EntailmentClient> make_nli_client(const PipelineConfig& config) {
  if (config.mock_nli == "lexical") {
    return std::make_unique<LexicalOverlapNli>();
  }
  if (!config.mock_nli.empty()) {
    return ScriptedNliClient::from_file(config.mock_nli);
  }
  std::string endpoint = env_or("FACTPOP_NLI_ENDPOINT", config.nli_endpoint);
  if (endpoint.empty()) {
    throw UserError("no entailment scorer configured: set nli_endpoint (or "
                    "FACTPOP_NLI_ENDPOINT) or pass --mock-nli");
  }
  return std::make_unique<HttpNliClient>(endpoint);
}

void run_stage(const std::string& stage, const PipelineConfig& config,
               const RunOptions& options) {
  fs::create_directories(config.out_dir);
  if (stage == "extract") return stage_extract(config, options);
  if (stage == "count") return stage_count(config, options);
  if (stage == "select-passages") return stage_select_passages(config, options);
  if (stage == "sample") return stage_sample(config, options);
  if (stage == "expand-answers") return stage_expand_answers(config, options);
  if (stage == "genq") return stage_genq(config, options);
  if (stage == "build-index") return stage_build_index(config, options);
  if (stage == "evaluate") return stage_evaluate(config, options);
  if (stage == "learn-router") return stage_learn_router(config, options);
  if (stage == "route-evaluate") return stage_route_evaluate(config, options);
  if (stage == "report") return stage_report(config, options);
  throw UserError("unknown stage: " + stage);
}

}  // namespace factpop
