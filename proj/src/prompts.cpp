#include "factpop/prompts.hpp"

namespace factpop {

std::string render_question_prompt(const QuestionPromptInputs& in) {
  std::string out;
  out += "Given a context and a triple (subject, relation, object), transform "
         "the triple to a question that asks \"Object\". The generated "
         "question must contain a given \"Subject\" and also be answerable "
         "without the context.\n";
  out += "\n";
  out += "# Context:\n";
  out += in.context + "\n";
  out += "\n";
  out += "# Triple:\n";
  out += "## Subject:\n";
  out += in.subject + "\n";
  out += "\n";
  out += "## Relation:\n";
  out += in.relation + "\n";
  out += "(Meaning: " + in.relation_description + ")\n";
  out += "\n";
  out += "## Object:\n";
  out += in.object + "\n";
  out += "\n";
  out += "# Output: <question only and must contain Subject>";
  return out;
}

std::string render_vanilla_prompt(const std::string& question) {
  return "# Question:\n" + question + "\n\n# Answer: <answer only>";
}

std::string render_context_prompt(const std::string& context,
                                  const std::string& question) {
  return "Given a context and a question, answer the question.\n\n# Context:\n" +
         context + "\n\n# Question:\n" + question + "\n\n# Answer: <answer only>";
}

std::string render_background_prompt(const std::string& question) {
  return "Generate a background document from Wikipedia to answer the given "
         "question. " +
         question;
}

std::string render_vanilla_prompt_compact(const std::string& question) {
  return "Question:" + question + "\nAnswer:";
}

std::string render_context_prompt_compact(const std::string& context,
                                          const std::string& question) {
  return "Context:" + context + "\nQuestion:" + question + "\nAnswer:";
}

const char* kFeedbackUnanswerable =
    "It is good that the question contains 'Subject' and not 'Object', but "
    "the question cannot be answered. Make the question more detailed if "
    "needed. Try again.";

const char* kFeedbackMissingSubject =
    "The question you generated does not contain 'Subject', but 'Subject' "
    "must be in the question. Try again.";

const char* kFeedbackMissingSubjectHasObject =
    "The question you generated does not contain 'Subject' and does contain "
    "'Object'. However, 'Subject' must be in the question. Also, 'Object' "
    "must not be in the question. Try again.";

const char* kFeedbackSubjectInsideObject =
    "The question you generated contains 'Subject' and 'Object', but 'Object' "
    "must not be in the question. Though 'Subject' is the substring of "
    "'Object', remove 'Object' and remain only 'Subject'.";

const char* kFeedbackUnanswerableObjectInSubject =
    "It is good that the question contains 'Subject', but the question cannot "
    "be answered. Make the question more detailed if needed. Try again.";

const char* kFeedbackHasObject =
    "The question you generated contains 'Subject' and 'Object', but 'Object' "
    "must not be in the question. Remove 'Object' and remain only 'Subject'.";

}  // namespace factpop
