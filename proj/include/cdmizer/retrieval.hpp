#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdmizer/corpus.hpp"
#include "cdmizer/types.hpp"

namespace cdmizer {

// Lowercase, split on non-alphanumerics, drop single-character tokens.
std::vector<std::string> tokenize(std::string_view text);

struct SparseVector {
  std::vector<std::uint32_t> terms;  // ascending vocabulary ids
  std::vector<double> weights;

  bool operator==(const SparseVector&) const = default;
};

// Cosine of two L2-normalized vectors, clamped to [0, 1]; 0 when either is empty.
double cosine(const SparseVector& a, const SparseVector& b);

// TF-IDF vectors over whole contract texts. Weight = raw count x
// (ln((1 + N) / (1 + df)) + 1), then L2-normalized. Immutable after build;
// must not outlive the corpus it indexes.
class RetrievalIndex {
 public:
  const Corpus& corpus() const { return *corpus_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<SparseVector>& vectors() const { return vectors_; }
  std::size_t size() const { return vectors_.size(); }

  std::optional<std::size_t> position(std::string_view doc_id) const;
  double similarity(std::size_t a, std::size_t b) const;

  bool same_content(const RetrievalIndex& other) const {
    return vocabulary_ == other.vocabulary_ && vectors_ == other.vectors_;
  }

 private:
  friend RetrievalIndex build_index(const Corpus& corpus);
  friend RetrievalIndex build_index_serial(const Corpus& corpus);

  const Corpus* corpus_ = nullptr;
  std::vector<std::string> vocabulary_;
  std::vector<SparseVector> vectors_;
};

// OpenMP kernel; build_index_serial is the plain reference kept for tests and
// benchmarks. Both produce identical indexes.
RetrievalIndex build_index(const Corpus& corpus);
RetrievalIndex build_index_serial(const Corpus& corpus);

// Row-major n x n matrix of pairwise similarities.
std::vector<double> similarity_matrix(const RetrievalIndex& index);
std::vector<double> similarity_matrix_serial(const RetrievalIndex& index);

struct RetrievedExample {
  std::string doc_id;
  double similarity = 0.0;
  Json clause_truth;
  std::string excerpt;
};

// Documents other than the query that carry ground truth for `clause`.
std::vector<std::string> eligible_pool(const RetrievalIndex& index, std::string_view query_id, ClauseKind clause);

// Top-k over the leave-one-out pool, sorted by similarity descending then doc id.
std::vector<RetrievedExample> retrieve(const RetrievalIndex& index, std::string_view query_id, ClauseKind clause,
                                       std::size_t k);

// Source of in-context examples for the with-RAG prompt.
class ExampleRetriever {
 public:
  virtual ~ExampleRetriever() = default;
  virtual std::vector<RetrievedExample> retrieve(const ContractDoc& query, ClauseKind clause, std::size_t k) = 0;
  virtual std::string name() const = 0;
};

class LexicalRetriever : public ExampleRetriever {
 public:
  explicit LexicalRetriever(const Corpus& corpus) : index_(build_index(corpus)) {}

  std::vector<RetrievedExample> retrieve(const ContractDoc& query, ClauseKind clause, std::size_t k) override {
    return cdmizer::retrieve(index_, query.id, clause, k);
  }
  std::string name() const override { return "lexical"; }
  const RetrievalIndex& index() const { return index_; }

 private:
  RetrievalIndex index_;
};

// Embeddings from an OpenAI-style /v1/embeddings endpoint, cosine similarity,
// same leave-one-out pool and ordering rules as the lexical retriever.
class EmbeddingRetriever : public ExampleRetriever {
 public:
  EmbeddingRetriever(const Corpus& corpus, std::string endpoint, std::string model, std::string api_key,
                     double timeout_s = 120.0);

  std::vector<RetrievedExample> retrieve(const ContractDoc& query, ClauseKind clause, std::size_t k) override;
  std::string name() const override { return "external"; }

 private:
  void ensure_embeddings();

  const Corpus& corpus_;
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  double timeout_s_;
  std::once_flag once_;
  std::vector<std::vector<double>> embeddings_;
};

}  // namespace cdmizer
