#include "cdmizer/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>

#include <omp.h>

#include "http_client.hpp"

namespace cdmizer {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() > 1) tokens.push_back(current);
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  if (a.terms.empty() || b.terms.empty()) return 0.0;
  double dot = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.terms.size() && j < b.terms.size()) {
    if (a.terms[i] < b.terms[j]) {
      ++i;
    } else if (b.terms[j] < a.terms[i]) {
      ++j;
    } else {
      dot += a.weights[i] * b.weights[j];
      ++i;
      ++j;
    }
  }
  return std::clamp(dot, 0.0, 1.0);
}

std::optional<std::size_t> RetrievalIndex::position(std::string_view doc_id) const {
  const ContractDoc* doc = corpus_->find(doc_id);
  if (doc == nullptr) return std::nullopt;
  return static_cast<std::size_t>(doc - corpus_->docs().data());
}

double RetrievalIndex::similarity(std::size_t a, std::size_t b) const {
  if (a == b && !vectors_[a].terms.empty()) return 1.0;
  return cosine(vectors_[a], vectors_[b]);
}

namespace {

double idf(std::size_t docs, std::size_t df) {
  return std::log(static_cast<double>(1 + docs) / static_cast<double>(1 + df)) + 1.0;
}

void normalize_l2(SparseVector& v) {
  double norm = 0.0;
  for (double w : v.weights) norm += w * w;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& w : v.weights) w /= norm;
}

// Sorted (term, count) pairs for one document.
std::vector<std::pair<std::string, std::uint32_t>> term_counts(std::string_view text) {
  std::vector<std::string> tokens = tokenize(text);
  std::sort(tokens.begin(), tokens.end());
  std::vector<std::pair<std::string, std::uint32_t>> out;
  for (std::string& token : tokens) {
    if (!out.empty() && out.back().first == token) {
      ++out.back().second;
    } else {
      out.emplace_back(std::move(token), 1);
    }
  }
  return out;
}

}  // namespace

RetrievalIndex build_index(const Corpus& corpus) {
  if (corpus.empty()) throw Error("cannot build a retrieval index over an empty corpus");
  const auto& docs = corpus.docs();
  const auto n = static_cast<std::int64_t>(docs.size());

  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> counts(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) counts[i] = term_counts(docs[i].text);

  std::vector<std::string> vocabulary;
  for (const auto& doc_counts : counts) {
    for (const auto& [term, count] : doc_counts) vocabulary.push_back(term);
  }
  std::sort(vocabulary.begin(), vocabulary.end());
  vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());

  std::vector<std::vector<std::uint32_t>> ids(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    ids[i].reserve(counts[i].size());
    for (const auto& [term, count] : counts[i]) {
      auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), term);
      ids[i].push_back(static_cast<std::uint32_t>(it - vocabulary.begin()));
    }
  }

  std::vector<std::size_t> df(vocabulary.size(), 0);
  for (const auto& doc_ids : ids) {
    for (std::uint32_t id : doc_ids) ++df[id];
  }

  RetrievalIndex index;
  index.corpus_ = &corpus;
  index.vectors_.resize(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    SparseVector& v = index.vectors_[i];
    v.terms = ids[i];
    v.weights.resize(ids[i].size());
    for (std::size_t t = 0; t < ids[i].size(); ++t) {
      v.weights[t] = static_cast<double>(counts[i][t].second) * idf(docs.size(), df[ids[i][t]]);
    }
    normalize_l2(v);
  }
  index.vocabulary_ = std::move(vocabulary);
  return index;
}

RetrievalIndex build_index_serial(const Corpus& corpus) {
  if (corpus.empty()) throw Error("cannot build a retrieval index over an empty corpus");
  const auto& docs = corpus.docs();

  std::vector<std::map<std::string, std::uint32_t>> counts(docs.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (const std::string& token : tokenize(docs[i].text)) ++counts[i][token];
    for (const auto& [term, count] : counts[i]) ++df[term];
  }

  RetrievalIndex index;
  index.corpus_ = &corpus;
  std::map<std::string, std::uint32_t> ids;
  for (const auto& [term, count] : df) {
    ids.emplace(term, static_cast<std::uint32_t>(index.vocabulary_.size()));
    index.vocabulary_.push_back(term);
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    SparseVector v;
    for (const auto& [term, count] : counts[i]) {
      v.terms.push_back(ids.at(term));
      v.weights.push_back(static_cast<double>(count) * idf(docs.size(), df.at(term)));
    }
    normalize_l2(v);
    index.vectors_.push_back(std::move(v));
  }
  return index;
}

std::vector<double> similarity_matrix(const RetrievalIndex& index) {
  const std::size_t n = index.size();
  std::vector<double> out(n * n, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = index.similarity(i, j);
  }
  return out;
}

std::vector<double> similarity_matrix_serial(const RetrievalIndex& index) {
  const std::size_t n = index.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = index.similarity(i, j);
  }
  return out;
}

namespace {

std::vector<RetrievedExample> rank_pool(const CorpusView& pool, ClauseKind clause, std::size_t k,
                                        const std::function<double(const ContractDoc&)>& score) {
  std::vector<RetrievedExample> ranked;
  pool.for_each([&](const ContractDoc& doc) {
    if (const Json* truth = doc.truth(clause)) {
      ranked.push_back({doc.id, score(doc), *truth, {}});
    }
  });
  std::sort(ranked.begin(), ranked.end(), [](const RetrievedExample& a, const RetrievedExample& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.doc_id < b.doc_id;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

}  // namespace

std::vector<std::string> eligible_pool(const RetrievalIndex& index, std::string_view query_id, ClauseKind clause) {
  std::vector<std::string> ids;
  leave_one_out(index.corpus(), query_id).for_each([&](const ContractDoc& doc) {
    if (doc.applicable(clause)) ids.push_back(doc.id);
  });
  return ids;
}

std::vector<RetrievedExample> retrieve(const RetrievalIndex& index, std::string_view query_id, ClauseKind clause,
                                       std::size_t k) {
  if (k == 0) throw Error("k must be at least 1");
  const auto query = index.position(query_id);
  if (!query) throw CorpusError("unknown query document '" + std::string(query_id) + "'");
  const CorpusView pool = leave_one_out(index.corpus(), query_id);
  auto ranked = rank_pool(pool, clause, k, [&](const ContractDoc& doc) {
    return index.similarity(*query, *index.position(doc.id));
  });
  for (RetrievedExample& example : ranked) {
    example.excerpt = clause_excerpt(index.corpus().at(example.doc_id).text, clause);
  }
  return ranked;
}

// ---------------------------------------------------------------------------

EmbeddingRetriever::EmbeddingRetriever(const Corpus& corpus, std::string endpoint, std::string model,
                                       std::string api_key, double timeout_s)
    : corpus_(corpus),
      endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_s_(timeout_s) {
  if (endpoint_.empty()) throw Error("retrieval.endpoint is required for the external provider");
}

void EmbeddingRetriever::ensure_embeddings() {
  std::call_once(once_, [this] {
    Json body = {{"model", model_}, {"input", Json::array()}};
    for (const ContractDoc& doc : corpus_.docs()) body["input"].push_back(doc.text);
    const HttpResponse response =
        http_post_json(with_default_path(endpoint_, "/v1/embeddings"), body.dump(), api_key_, timeout_s_);
    if (response.status < 200 || response.status >= 300) {
      throw Error("embedding endpoint returned HTTP " + std::to_string(response.status));
    }
    const Json doc = Json::parse(response.body);
    const Json& data = doc.at("data");
    if (data.size() != corpus_.size()) throw Error("embedding endpoint returned the wrong number of vectors");
    std::vector<std::vector<double>> vectors(corpus_.size());
    for (const Json& entry : data) {
      const std::size_t i = entry.contains("index") ? entry.at("index").get<std::size_t>() : 0;
      if (i >= vectors.size()) throw Error("embedding index out of range");
      vectors[i] = entry.at("embedding").get<std::vector<double>>();
    }
    embeddings_ = std::move(vectors);
  });
}

std::vector<RetrievedExample> EmbeddingRetriever::retrieve(const ContractDoc& query, ClauseKind clause,
                                                           std::size_t k) {
  if (k == 0) throw Error("k must be at least 1");
  ensure_embeddings();
  auto position = [this](std::string_view id) {
    return static_cast<std::size_t>(&corpus_.at(id) - corpus_.docs().data());
  };
  const std::vector<double>& q = embeddings_[position(query.id)];
  auto cosine_dense = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
  };
  auto ranked = rank_pool(leave_one_out(corpus_, query.id), clause, k, [&](const ContractDoc& doc) {
    return cosine_dense(q, embeddings_[position(doc.id)]);
  });
  for (RetrievedExample& example : ranked) {
    example.excerpt = clause_excerpt(corpus_.at(example.doc_id).text, clause);
  }
  return ranked;
}

}  // namespace cdmizer
