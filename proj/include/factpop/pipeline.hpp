#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "factpop/dataset_builder.hpp"
#include "factpop/model_clients.hpp"

namespace factpop {

// Pipeline orchestration: one config file drives every stage; stages hand off
// through files in out_dir and leave a manifest recording the config hash and
// input/output content hashes so stale artifacts are detected.

struct PipelineConfig {
  // inputs
  std::string entities_tsv = "kb/entities.tsv";
  std::string relations_tsv = "kb/relations.tsv";
  std::string triples_tsv = "kb/triples.tsv";
  std::string dump = "corpus/dump.jsonl";
  std::string title_map = "corpus/title_map.tsv";
  std::string page_views;  // optional key<TAB>views table
  std::string out_dir = "out";

  // benchmark construction
  std::vector<std::string> relations;  // empty = every KB relation
  std::vector<uint64_t> bin_edges = {1, 5, 10, 50, 100, 500, 1000};
  uint64_t cap = 200;
  int roundtrip_k = 3;

  // retrieval
  int chunk_size = 256;
  int chunk_overlap = 0;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  int top_k = 1;

  // statistics
  int bootstrap_samples = 1000;
  double bootstrap_level = 0.95;
  uint64_t seed = 0;
  int trials = 1;
  int max_concurrent_requests = 4;

  // behavior switches
  bool subject_is_page = false;
  bool count_distinct_triples = false;
  bool screen_answer_aliases = false;
  bool compact_templates = false;
  bool invert_routing = false;

  // clients; empty endpoint falls back to FACTPOP_LM_ENDPOINT/FACTPOP_LM_KEY/
  // FACTPOP_NLI_ENDPOINT. mock_lm is a scripted-rule file or "extractive";
  // mock_nli is a scripted-rule file or "lexical".
  std::string lm_endpoint;
  std::string lm_key;
  std::string lm_model = "default";
  std::string nli_endpoint;
  std::string mock_lm;
  std::string mock_nli;

  static PipelineConfig from_file(const std::filesystem::path& path);
  BinSpec bin_spec() const;
  // Hash of the full effective config (flag overrides included).
  uint64_t config_hash() const;
};

struct RunOptions {
  bool force = false;
  std::string mode;  // evaluate: vanilla | bm25 | generated_context | oracle
  std::string retrieved_records = "records_bm25.jsonl";
  std::string human_rewrites;  // genq: JSONL of {id, question}
};

extern const std::vector<std::string> kStageNames;

// Stage name of the pipeline step that writes the named artifact.
std::string producing_stage(const std::string& artifact);

// Runs one stage; throws UserError for anything the operator must fix.
void run_stage(const std::string& stage, const PipelineConfig& config,
               const RunOptions& options);

// Client factories shared by stages and tests. items is only consulted for
// the "extractive" mock, which needs the dataset's questions and answers.
std::unique_ptr<LmClient> make_lm_client(const PipelineConfig& config,
                                         const std::vector<QAItem>* items);
std::unique_ptr<EntailmentClient> make_nli_client(const PipelineConfig& config);

}  // namespace factpop
