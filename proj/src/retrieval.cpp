#include "factpop/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "factpop/prompts.hpp"
#include "factpop/text_norm.hpp"
#include "factpop/util.hpp"
#include "json.hpp"

namespace factpop {

namespace {

constexpr const char* kTokenizerId = "lowercase-alnum-v1";
constexpr int kFormatVersion = 1;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

struct WordSpan {
  size_t begin;
  size_t end;
};

std::vector<WordSpan> whitespace_words(std::string_view text) {
  std::vector<WordSpan> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    words.push_back({begin, i});
  }
  return words;
}

}  // namespace

const char* Bm25Index::tokenizer_id() { return kTokenizerId; }

std::vector<Chunk> chunk_corpus(const std::vector<PassageRecord>& passages,
                                int chunk_size, int overlap) {
  if (chunk_size <= 0) throw UserError("chunk_size must be positive");
  if (overlap < 0 || overlap >= chunk_size) {
    throw UserError("chunk overlap must satisfy 0 <= overlap < chunk_size");
  }
  const size_t size = static_cast<size_t>(chunk_size);
  const size_t step = size - static_cast<size_t>(overlap);

  std::vector<Chunk> chunks;
  for (const PassageRecord& p : passages) {
    auto words = whitespace_words(p.text);
    size_t ordinal = 0;
    for (size_t start = 0; start < words.size(); start += step) {
      size_t stop = std::min(start + size, words.size());
      Chunk chunk;
      chunk.chunk_id = std::to_string(p.page_id) + "#" + std::to_string(ordinal);
      chunk.page_id = p.page_id;
      chunk.text = p.text.substr(words[start].begin,
                                 words[stop - 1].end - words[start].begin);
      chunk.token_count = static_cast<uint32_t>(stop - start);
      chunks.push_back(std::move(chunk));
      ++ordinal;
      if (stop == words.size()) break;
    }
  }
  return chunks;
}

Bm25Index Bm25Index::build(std::vector<Chunk> chunks) {
  return build(std::move(chunks), Params{});
}

Bm25Index Bm25Index::build(std::vector<Chunk> chunks, const Params& params) {
  Bm25Index index;
  index.params_ = params;
  index.chunks_ = std::move(chunks);
  index.doc_len_.resize(index.chunks_.size());

  uint64_t total_len = 0;
  for (uint32_t doc = 0; doc < index.chunks_.size(); ++doc) {
    auto tokens = ascii_word_tokens(index.chunks_[doc].text);
    index.doc_len_[doc] = static_cast<uint32_t>(tokens.size());
    total_len += tokens.size();
    std::map<std::string, uint32_t> tf;
    for (const std::string& t : tokens) ++tf[t];
    for (const auto& [term, freq] : tf) {
      index.postings_[term].emplace_back(doc, freq);
    }
  }
  index.avg_doc_len_ =
      index.chunks_.empty()
          ? 0.0
          : static_cast<double>(total_len) / static_cast<double>(index.chunks_.size());
  return index;
}

std::vector<RetrievalResult> Bm25Index::retrieve(const std::string& query,
                                                 int k) const {
  if (k < 1) throw UserError("retrieval k must be >= 1");
  auto terms = ascii_word_tokens(query);
  if (terms.empty()) return {};

  const double n_docs = static_cast<double>(chunks_.size());
  std::map<uint32_t, double> scores;
  for (const std::string& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& plist = it->second;
    const double df = static_cast<double>(plist.size());
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const auto& [doc, freq] : plist) {
      const double f = static_cast<double>(freq);
      const double norm =
          params_.k1 * (1.0 - params_.b +
                        params_.b * static_cast<double>(doc_len_[doc]) /
                            avg_doc_len_);
      scores[doc] += idf * (f * (params_.k1 + 1.0)) / (f + norm);
    }
  }

  std::vector<std::pair<uint32_t, double>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [doc, score] : scores) {
    if (score > 0.0) ranked.emplace_back(doc, score);
  }
  std::sort(ranked.begin(), ranked.end(),
            [&](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return chunks_[a.first].chunk_id < chunks_[b.first].chunk_id;
            });
  if (ranked.size() > static_cast<size_t>(k)) ranked.resize(k);

  std::vector<RetrievalResult> out;
  out.reserve(ranked.size());
  for (size_t i = 0; i < ranked.size(); ++i) {
    out.push_back(RetrievalResult{chunks_[ranked[i].first], ranked[i].second,
                                  static_cast<int>(i) + 1});
  }
  return out;
}

void Bm25Index::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);

  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["tokenizer_id"] = kTokenizerId;
  header["k1"] = params_.k1;
  header["b"] = params_.b;
  header["chunk_size"] = params_.chunk_size;
  header["chunk_overlap"] = params_.chunk_overlap;
  header["doc_count"] = chunks_.size();
  atomic_write(dir / "header.json",
               [&](std::ostream& out) { out << header.dump(2) << "\n"; });

  atomic_write(dir / "chunks.jsonl", [&](std::ostream& out) {
    for (const Chunk& c : chunks_) {
      nlohmann::json rec{{"chunk_id", c.chunk_id},
                         {"page_id", c.page_id},
                         {"text", c.text},
                         {"token_count", c.token_count}};
      out << rec.dump() << "\n";
    }
  });

  atomic_write(dir / "doclens.tsv", [&](std::ostream& out) {
    for (size_t doc = 0; doc < chunks_.size(); ++doc) {
      out << chunks_[doc].chunk_id << "\t" << doc_len_[doc] << "\n";
    }
  });

  atomic_write(dir / "postings.tsv", [&](std::ostream& out) {
    for (const auto& [term, plist] : postings_) {
      out << term << "\t" << plist.size();
      for (const auto& [doc, freq] : plist) {
        out << "\t" << doc << ":" << freq;
      }
      out << "\n";
    }
  });
}

Bm25Index Bm25Index::load(const std::filesystem::path& dir) {
  nlohmann::json header =
      nlohmann::json::parse(read_file(dir / "header.json"), nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw UserError("invalid index header: " + (dir / "header.json").string());
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw UserError("unsupported index format version in " + dir.string());
  }
  if (header.value("tokenizer_id", std::string()) != kTokenizerId) {
    throw UserError("index at " + dir.string() +
                    " was built with a different tokenizer");
  }

  Bm25Index index;
  index.params_.k1 = header.at("k1").get<double>();
  index.params_.b = header.at("b").get<double>();
  index.params_.chunk_size = header.at("chunk_size").get<int>();
  index.params_.chunk_overlap = header.at("chunk_overlap").get<int>();
  const size_t doc_count = header.at("doc_count").get<size_t>();

  size_t lineno = 0;
  for (const std::string& line : read_lines(dir / "chunks.jsonl")) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw UserError((dir / "chunks.jsonl").string() + ":" +
                      std::to_string(lineno) + ": invalid chunk record");
    }
    Chunk c;
    c.chunk_id = rec.at("chunk_id").get<std::string>();
    c.page_id = rec.at("page_id").get<int64_t>();
    c.text = rec.at("text").get<std::string>();
    c.token_count = rec.at("token_count").get<uint32_t>();
    index.chunks_.push_back(std::move(c));
  }
  if (index.chunks_.size() != doc_count) {
    throw UserError("index chunk count does not match header in " +
                    dir.string());
  }

  index.doc_len_.resize(doc_count);
  lineno = 0;
  uint64_t total_len = 0;
  size_t doc = 0;
  for (const std::string& line : read_lines(dir / "doclens.tsv")) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2 || doc >= doc_count ||
        cols[0] != index.chunks_[doc].chunk_id) {
      throw UserError((dir / "doclens.tsv").string() + ":" +
                      std::to_string(lineno) + ": doc-length table mismatch");
    }
    index.doc_len_[doc] = static_cast<uint32_t>(std::stoul(cols[1]));
    total_len += index.doc_len_[doc];
    ++doc;
  }
  if (doc != doc_count) {
    throw UserError("doc-length table truncated in " + dir.string());
  }
  index.avg_doc_len_ = doc_count == 0
                           ? 0.0
                           : static_cast<double>(total_len) /
                                 static_cast<double>(doc_count);

  lineno = 0;
  for (const std::string& line : read_lines(dir / "postings.tsv")) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 3) {
      throw UserError((dir / "postings.tsv").string() + ":" +
                      std::to_string(lineno) + ": malformed posting line");
    }
    const std::string& term = cols[0];
    size_t df = std::stoul(cols[1]);
    if (df != cols.size() - 2) {
      throw UserError((dir / "postings.tsv").string() + ":" +
                      std::to_string(lineno) + ": df does not match postings");
    }
    auto& plist = index.postings_[term];
    for (size_t i = 2; i < cols.size(); ++i) {
      size_t colon = cols[i].find(':');
      if (colon == std::string::npos) {
        throw UserError((dir / "postings.tsv").string() + ":" +
                        std::to_string(lineno) + ": malformed posting entry");
      }
      uint32_t doc_idx = static_cast<uint32_t>(std::stoul(cols[i].substr(0, colon)));
      uint32_t freq = static_cast<uint32_t>(std::stoul(cols[i].substr(colon + 1)));
      if (doc_idx >= doc_count || freq == 0) {
        throw UserError((dir / "postings.tsv").string() + ":" +
                        std::to_string(lineno) + ": posting out of range");
      }
      plist.emplace_back(doc_idx, freq);
    }
  }
  return index;
}

RetrievalResult oracle_retrieve(const QAItem& item) {
  if (item.passage_text.empty()) {
    throw UserError("item " + item.id + " has no supporting passage");
  }
  Chunk chunk;
  chunk.chunk_id = "oracle:" + std::to_string(item.passage_page_id);
  chunk.page_id = item.passage_page_id;
  chunk.text = item.passage_text;
  chunk.token_count =
      static_cast<uint32_t>(whitespace_words(item.passage_text).size());
  return RetrievalResult{std::move(chunk), 1.0, 1};
}

std::string generate_context(const std::string& question, LmClient& lm,
                             const RetryPolicy& retry) {
  return complete_with_retry(lm, {render_background_prompt(question), 0.0, 512},
                             retry);
}

}  // namespace factpop
