#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace factpop {

// Language model and entailment scorer boundaries. Everything upstream of
// these interfaces sees one text string per completion and one score per
// premise/hypothesis pair, nothing provider-specific.

struct LmRequest {
  std::string prompt;
  double temperature = 0.0;  // fixed at 0 for every toolkit call
  int max_tokens = 256;
};

struct EntailmentRequest {
  std::string premise;
  std::string hypothesis;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LmClient {
 public:
  virtual ~LmClient() = default;
  virtual std::string complete(const LmRequest& req) = 0;
};

class EntailmentClient {
 public:
  virtual ~EntailmentClient() = default;
  virtual double entail(const EntailmentRequest& req) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
};

// Retries TransportError with exponential backoff; other exceptions pass
// through. Exhausted retries rethrow the last TransportError.
std::string complete_with_retry(LmClient& client, const LmRequest& req,
                                const RetryPolicy& policy = {});

// Validates the request (both fields non-empty) and the response (score in
// [0,1]; anything else is a transport-level fault).
double nli_score(EntailmentClient& client, const EntailmentRequest& req);

// Deterministic mock LM. Rules are checked in order; the first match answers.
// A rule matches on the exact prompt or on all of its substring keys. With no
// match the default answers, and without a default the client throws.
class ScriptedLmClient : public LmClient {
 public:
  struct Rule {
    std::optional<std::string> exact;
    std::vector<std::string> keys;  // all must be substrings of the prompt
    std::string response;
  };

  ScriptedLmClient() = default;
  static std::unique_ptr<ScriptedLmClient> from_file(
      const std::filesystem::path& path);

  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
  void set_default(std::string response) { default_ = std::move(response); }
  // The next n calls throw TransportError before matching.
  void fail_next(int n);

  std::string complete(const LmRequest& req) override;
  int calls() const;

 private:
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
  mutable std::mutex mu_;
  int calls_ = 0;
  int failures_pending_ = 0;
};

// Deterministic mock scorer: ordered rules of exact or substring matches.
class ScriptedNliClient : public EntailmentClient {
 public:
  struct Rule {
    std::optional<std::string> premise;       // exact
    std::optional<std::string> hypothesis;    // exact
    std::optional<std::string> premise_key;   // substring
    std::optional<std::string> hypothesis_key;
    double score = 0.0;
  };

  ScriptedNliClient() = default;
  static std::unique_ptr<ScriptedNliClient> from_file(
      const std::filesystem::path& path);

  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
  void set_default(double score) { default_ = score; }
  void fail_next(int n);

  double entail(const EntailmentRequest& req) override;

 private:
  std::vector<Rule> rules_;
  std::optional<double> default_;
  mutable std::mutex mu_;
  int failures_pending_ = 0;
};

// Offline scorer: fraction of the hypothesis's unique word tokens that occur
// in the premise. Identical strings score 1.0.
class LexicalOverlapNli : public EntailmentClient {
 public:
  double entail(const EntailmentRequest& req) override;
};

// Offline reader standing in for an LM during evaluation. It answers with the
// first acceptable answer found in the prompt's "# Context:" section and
// "unknown" otherwise, so its correctness on a question equals whether the
// context contains an answer.
class ExtractiveReader : public LmClient {
 public:
  // question (raw) -> acceptable answers
  explicit ExtractiveReader(
      std::map<std::string, std::vector<std::string>> answers_by_question);

  std::string complete(const LmRequest& req) override;

 private:
  std::map<std::string, std::vector<std::string>> answers_;  // normalized keys
};

// Remote clients speaking the JSON wire forms
//   {model, prompt, temperature, max_tokens} -> {text}
//   {premise, hypothesis} -> {entailment}
// The endpoint is a full URL, e.g. http://127.0.0.1:8080/complete.
class HttpLmClient : public LmClient {
 public:
  HttpLmClient(std::string endpoint, std::string api_key, std::string model);
  std::string complete(const LmRequest& req) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::string model_;
};

class HttpNliClient : public EntailmentClient {
 public:
  explicit HttpNliClient(std::string endpoint);
  double entail(const EntailmentRequest& req) override;

 private:
  std::string endpoint_;
};

}  // namespace factpop
