#pragma once

#include <string>

namespace factpop {

// Rendered prompt templates and refinement feedback messages. These strings
// are external contracts: scripted clients key on them and downstream models
// were tuned against them, so they must not drift.

struct QuestionPromptInputs {
  std::string context;
  std::string subject;
  std::string relation;
  std::string relation_description;
  std::string object;
};

// Question generation from a triple and its supporting passage.
std::string render_question_prompt(const QuestionPromptInputs& in);

// Closed-book answering: question only.
std::string render_vanilla_prompt(const std::string& question);

// Contextual answering: retrieved or gold context plus question.
std::string render_context_prompt(const std::string& context,
                                  const std::string& question);

// Background-document generation for the generated-context mode.
std::string render_background_prompt(const std::string& question);

// Compact single-line template family, selectable instead of the canonical
// prompts above.
std::string render_vanilla_prompt_compact(const std::string& question);
std::string render_context_prompt_compact(const std::string& context,
                                          const std::string& question);

// Refinement feedback, keyed by the failed criteria combination.
extern const char* kFeedbackUnanswerable;
extern const char* kFeedbackMissingSubject;
extern const char* kFeedbackMissingSubjectHasObject;
extern const char* kFeedbackSubjectInsideObject;
extern const char* kFeedbackUnanswerableObjectInSubject;
extern const char* kFeedbackHasObject;

}  // namespace factpop
