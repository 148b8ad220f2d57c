#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "factpop/pipeline.hpp"
#include "factpop/util.hpp"

namespace {

const char* stage_blurb(const std::string& stage) {
  if (stage == "extract") return "parse the dump and extract triple instances";
  if (stage == "count") return "tally S and S-R corpus counts";
  if (stage == "select-passages") {
    return "pick each triple's best supporting passage by entailment";
  }
  if (stage == "sample") return "draw the per-relation, per-bin triple sample";
  if (stage == "expand-answers") {
    return "expand object labels and aliases into answer sets";
  }
  if (stage == "genq") return "generate questions with the round-trip check";
  if (stage == "build-index") return "chunk the corpus and build the BM25 index";
  if (stage == "evaluate") return "answer the dataset in one evaluation mode";
  if (stage == "learn-router") {
    return "learn per-relation retrieval thresholds on the train split";
  }
  if (stage == "route-evaluate") {
    return "score the learned routing policy on held-out items";
  }
  if (stage == "report") return "aggregate eval records into the report tables";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factpop: fact-popularity QA benchmark toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> mock_lm;
  std::optional<std::string> mock_nli;
  bool force = false;
  bool invert = false;
  factpop::RunOptions options;

  for (const std::string& stage : factpop::kStageNames) {
    CLI::App* cmd = app.add_subcommand(stage, stage_blurb(stage));
    cmd->add_option("--config", config_path, "pipeline config file (JSON)")
        ->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_flag("--force", force,
                  "run even if upstream artifacts look stale");
    cmd->add_option("--mock-lm", mock_lm,
                    "scripted LM rules file, or 'extractive'");
    cmd->add_option("--mock-nli", mock_nli,
                    "scripted entailment rules file, or 'lexical'");
    if (stage == "evaluate") {
      cmd->add_option("--mode", options.mode,
                      "vanilla | bm25 | generated_context | oracle")
          ->required();
    }
    if (stage == "genq") {
      cmd->add_option("--human-rewrites", options.human_rewrites,
                      "JSONL of {id, question} written by annotators");
    }
    if (stage == "learn-router" || stage == "route-evaluate") {
      cmd->add_option("--retrieved-records", options.retrieved_records,
                      "eval records file for the retrieval arm");
      cmd->add_flag("--invert-routing", invert, "flip the routing rule");
    }
    if (stage == "route-evaluate") {
      cmd->add_option("--trials", trials,
                      "repeat split/learn/evaluate this many times");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    std::string stage = app.get_subcommands().front()->get_name();
    factpop::PipelineConfig config =
        factpop::PipelineConfig::from_file(config_path);
    if (seed) config.seed = *seed;
    if (trials) config.trials = *trials;
    if (mock_lm) config.mock_lm = *mock_lm;
    if (mock_nli) config.mock_nli = *mock_nli;
    if (invert) config.invert_routing = true;
    options.force = force;
    factpop::run_stage(stage, config, options);
    return 0;
  } catch (const factpop::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
