#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "factpop/corpus_ingest.hpp"
#include "factpop/dataset_builder.hpp"
#include "factpop/model_clients.hpp"

namespace factpop {

// Sparse retrieval over the chunked corpus plus the oracle and
// generated-context backends.
//
// Two tokenizers are in play: chunk boundaries count whitespace-delimited
// words, while scoring uses lowercase alphanumeric tokens. The scoring
// tokenizer's id is recorded in the persisted index header and checked on
// load.

struct Chunk {
  std::string chunk_id;  // "<page_id>#<ordinal>"
  int64_t page_id = 0;
  std::string text;
  uint32_t token_count = 0;  // whitespace words
};

struct RetrievalResult {
  Chunk chunk;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// Greedy partition of each page into windows of chunk_size whitespace words
// advancing by chunk_size - overlap. Chunk text is the original substring
// spanning its words, so with overlap 0 the chunks' token sequences
// concatenate back to the page's token sequence.
std::vector<Chunk> chunk_corpus(const std::vector<PassageRecord>& passages,
                                int chunk_size = 256, int overlap = 0);

class Bm25Index {
 public:
  struct Params {
    double k1 = 1.2;
    double b = 0.75;
    int chunk_size = 256;
    int chunk_overlap = 0;
  };

  static const char* tokenizer_id();

  static Bm25Index build(std::vector<Chunk> chunks);
  static Bm25Index build(std::vector<Chunk> chunks, const Params& params);

  // Okapi BM25: idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), tf component
  // f*(k1+1) / (f + k1*(1 - b + b*dl/avgdl)). Query tokens score as a
  // multiset. Zero-score documents are excluded; ties break on chunk_id.
  std::vector<RetrievalResult> retrieve(const std::string& query, int k) const;

  void save(const std::filesystem::path& dir) const;
  static Bm25Index load(const std::filesystem::path& dir);

  const Params& params() const { return params_; }
  size_t doc_count() const { return chunks_.size(); }
  const std::vector<Chunk>& chunks() const { return chunks_; }

 private:
  Params params_;
  std::vector<Chunk> chunks_;
  std::vector<uint32_t> doc_len_;  // scoring-tokenizer lengths
  double avg_doc_len_ = 0.0;
  std::map<std::string, std::vector<std::pair<uint32_t, uint32_t>>> postings_;
};

// The item's own supporting passage as a rank-1, score-1 result.
RetrievalResult oracle_retrieve(const QAItem& item);

// Background document generated by the LM for use as context.
std::string generate_context(const std::string& question, LmClient& lm,
                             const RetryPolicy& retry = {});

}  // namespace factpop
