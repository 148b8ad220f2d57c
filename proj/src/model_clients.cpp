#include "factpop/model_clients.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace factpop {

std::string complete_with_retry(LmClient& client, const LmRequest& req,
                                const RetryPolicy& policy) {
  auto backoff = policy.initial_backoff;
  int attempts = std::max(policy.attempts, 1);
  for (int attempt = 1;; ++attempt) {
    try {
      return client.complete(req);
    } catch (const TransportError&) {
      if (attempt >= attempts) throw;
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(backoff.count()) * policy.multiplier));
    }
  }
}

double nli_score(EntailmentClient& client, const EntailmentRequest& req) {
  if (req.premise.empty() || req.hypothesis.empty()) {
    throw UserError("entailment request requires non-empty premise and hypothesis");
  }
  double score = client.entail(req);
  if (!(score >= 0.0 && score <= 1.0)) {
    throw TransportError("entailment score out of [0,1]: " +
                         std::to_string(score));
  }
  return score;
}

void ScriptedLmClient::fail_next(int n) {
  std::lock_guard<std::mutex> lock(mu_);
  failures_pending_ = n;
}

int ScriptedLmClient::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

std::string ScriptedLmClient::complete(const LmRequest& req) {
  std::lock_guard<std::mutex> lock(mu_);
  ++calls_;
  if (failures_pending_ > 0) {
    --failures_pending_;
    throw TransportError("scripted failure");
  }
  for (const Rule& rule : rules_) {
    if (rule.exact) {
      if (req.prompt == *rule.exact) return rule.response;
      continue;
    }
    bool all = !rule.keys.empty();
    for (const std::string& key : rule.keys) {
      if (req.prompt.find(key) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return rule.response;
  }
  if (default_) return *default_;
  throw TransportError("scripted LM has no rule for prompt: " +
                       req.prompt.substr(0, 120));
}

std::unique_ptr<ScriptedLmClient> ScriptedLmClient::from_file(
    const std::filesystem::path& path) {
  auto client = std::make_unique<ScriptedLmClient>();
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid mock rule");
    }
    if (rec.contains("default")) {
      client->set_default(rec["default"].get<std::string>());
      continue;
    }
    Rule rule;
    if (rec.contains("match")) rule.exact = rec["match"].get<std::string>();
    if (rec.contains("key")) rule.keys.push_back(rec["key"].get<std::string>());
    if (rec.contains("keys")) {
      for (const auto& k : rec["keys"]) rule.keys.push_back(k.get<std::string>());
    }
    if (!rec.contains("response") || (!rule.exact && rule.keys.empty())) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": rule needs match/key(s) and response");
    }
    rule.response = rec["response"].get<std::string>();
    client->add_rule(std::move(rule));
  }
  return client;
}

void ScriptedNliClient::fail_next(int n) {
  std::lock_guard<std::mutex> lock(mu_);
  failures_pending_ = n;
}

double ScriptedNliClient::entail(const EntailmentRequest& req) {
  std::lock_guard<std::mutex> lock(mu_);
  if (failures_pending_ > 0) {
    --failures_pending_;
    throw TransportError("scripted failure");
  }
  for (const Rule& rule : rules_) {
    if (rule.premise && *rule.premise != req.premise) continue;
    if (rule.hypothesis && *rule.hypothesis != req.hypothesis) continue;
    if (rule.premise_key &&
        req.premise.find(*rule.premise_key) == std::string::npos) {
      continue;
    }
    if (rule.hypothesis_key &&
        req.hypothesis.find(*rule.hypothesis_key) == std::string::npos) {
      continue;
    }
    return rule.score;
  }
  if (default_) return *default_;
  throw TransportError("scripted scorer has no rule for hypothesis: " +
                       req.hypothesis.substr(0, 120));
}

std::unique_ptr<ScriptedNliClient> ScriptedNliClient::from_file(
    const std::filesystem::path& path) {
  auto client = std::make_unique<ScriptedNliClient>();
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": invalid mock rule");
    }
    if (rec.contains("default")) {
      client->set_default(rec["default"].get<double>());
      continue;
    }
    Rule rule;
    if (rec.contains("premise")) rule.premise = rec["premise"].get<std::string>();
    if (rec.contains("hypothesis")) {
      rule.hypothesis = rec["hypothesis"].get<std::string>();
    }
    if (rec.contains("premise_key")) {
      rule.premise_key = rec["premise_key"].get<std::string>();
    }
    if (rec.contains("hypothesis_key")) {
      rule.hypothesis_key = rec["hypothesis_key"].get<std::string>();
    }
    bool has_selector = rule.premise || rule.hypothesis || rule.premise_key ||
                        rule.hypothesis_key;
    if (!rec.contains("score") || !has_selector) {
      throw UserError(path.string() + ":" + std::to_string(lineno) +
                      ": rule needs a selector and score");
    }
    rule.score = rec["score"].get<double>();
    client->add_rule(std::move(rule));
  }
  return client;
}

double LexicalOverlapNli::entail(const EntailmentRequest& req) {
  if (req.premise == req.hypothesis) return 1.0;
  auto hyp = ascii_word_tokens(req.hypothesis);
  if (hyp.empty()) return 0.0;
  auto prem = ascii_word_tokens(req.premise);
  std::set<std::string> premise_set(prem.begin(), prem.end());
  std::set<std::string> hyp_set(hyp.begin(), hyp.end());
  size_t hit = 0;
  for (const std::string& tok : hyp_set) {
    if (premise_set.count(tok)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(hyp_set.size());
}

ExtractiveReader::ExtractiveReader(
    std::map<std::string, std::vector<std::string>> answers_by_question) {
  for (auto& [question, answers] : answers_by_question) {
    std::vector<std::string> sorted = answers;
    std::sort(sorted.begin(), sorted.end());
    answers_[normalize_surface(question)] = std::move(sorted);
  }
}

namespace {

// Returns the text of the section introduced by `header` up to the next
// line starting with "# ", or an empty string when absent.
std::string prompt_section(const std::string& prompt, const std::string& header) {
  size_t at = prompt.find(header);
  if (at == std::string::npos) return {};
  size_t start = at + header.size();
  size_t end = prompt.find("\n# ", start);
  std::string body = end == std::string::npos ? prompt.substr(start)
                                              : prompt.substr(start, end - start);
  while (!body.empty() && (body.front() == '\n' || body.front() == ' ')) {
    body.erase(body.begin());
  }
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) {
    body.pop_back();
  }
  return body;
}

}  // namespace

std::string ExtractiveReader::complete(const LmRequest& req) {
  std::string context = prompt_section(req.prompt, "# Context:");
  std::string question = prompt_section(req.prompt, "# Question:");
  auto it = answers_.find(normalize_surface(question));
  if (it != answers_.end() && !context.empty()) {
    for (const std::string& answer : it->second) {
      if (contains_normalized(context, answer)) return answer;
    }
  }
  return "unknown";
}

namespace {

// Splits http://host:port/path into a client base and request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  size_t scheme = url.find("://");
  size_t path_at = scheme == std::string::npos
                       ? url.find('/')
                       : url.find('/', scheme + 3);
  if (path_at == std::string::npos) return {url, "/"};
  return {url.substr(0, path_at), url.substr(path_at)};
}

nlohmann::json post_json(const std::string& endpoint, const std::string& api_key,
                         const nlohmann::json& body) {
  auto [base, path] = split_url(endpoint);
  httplib::Client http(base);
  http.set_connection_timeout(10);
  http.set_read_timeout(60);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = http.Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("no response from " + endpoint);
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                         endpoint);
  }
  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw TransportError("invalid JSON from " + endpoint);
  }
  return parsed;
}

}  // namespace

HttpLmClient::HttpLmClient(std::string endpoint, std::string api_key,
                           std::string model)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)) {}

std::string HttpLmClient::complete(const LmRequest& req) {
  nlohmann::json body{{"model", model_},
                      {"prompt", req.prompt},
                      {"temperature", req.temperature},
                      {"max_tokens", req.max_tokens}};
  nlohmann::json res = post_json(endpoint_, api_key_, body);
  if (!res.contains("text") || !res["text"].is_string()) {
    throw TransportError("LM response missing text field");
  }
  return res["text"].get<std::string>();
}

HttpNliClient::HttpNliClient(std::string endpoint)
    : endpoint_(std::move(endpoint)) {}

double HttpNliClient::entail(const EntailmentRequest& req) {
  nlohmann::json body{{"premise", req.premise}, {"hypothesis", req.hypothesis}};
  nlohmann::json res = post_json(endpoint_, "", body);
  if (!res.contains("entailment") || !res["entailment"].is_number()) {
    throw TransportError("scorer response missing entailment field");
  }
  return res["entailment"].get<double>();
}

}  // namespace factpop
