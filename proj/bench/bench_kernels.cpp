#include <benchmark/benchmark.h>

#include <map>

#include "cdmizer/corpus_gen.hpp"
#include "cdmizer/evaluator.hpp"
#include "cdmizer/retrieval.hpp"

using namespace cdmizer;

namespace {

const Corpus& corpus_of(std::size_t docs) {
  static std::map<std::size_t, Corpus> cache;
  auto it = cache.find(docs);
  if (it == cache.end()) {
    CorpusGenOptions opts;
    opts.docs = docs;
    opts.threshold_docs = docs * 37 / 60;
    it = cache.emplace(docs, generate_fixture_corpus(opts)).first;
  }
  return it->second;
}

void BM_BuildIndex(benchmark::State& state) {
  const Corpus& c = corpus_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_index(c));
}

void BM_BuildIndexSerial(benchmark::State& state) {
  const Corpus& c = corpus_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_index_serial(c));
}

void BM_SimilarityMatrix(benchmark::State& state) {
  const RetrievalIndex index = build_index(corpus_of(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(similarity_matrix(index));
}

void BM_SimilarityMatrixSerial(benchmark::State& state) {
  const RetrievalIndex index = build_index(corpus_of(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(similarity_matrix_serial(index));
}

// Each truth scored against a copy of itself.
struct ScoreInput {
  std::vector<Json> generated;
  std::vector<ScoreJob> jobs;
};

ScoreInput score_input(std::size_t docs) {
  ScoreInput in;
  const Corpus& c = corpus_of(docs);
  for (const ContractDoc& doc : c.docs()) {
    for (const auto& [clause, truth] : doc.ground_truth) in.generated.push_back(truth);
  }
  std::size_t i = 0;
  for (const ContractDoc& doc : c.docs()) {
    for (const auto& [clause, truth] : doc.ground_truth) in.jobs.push_back({&in.generated[i++], &truth});
  }
  return in;
}

void BM_ScoreBatch(benchmark::State& state) {
  const ScoreInput in = score_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(score_batch(in.jobs, fixture_schema()));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * in.jobs.size()));
}

void BM_ScoreBatchSerial(benchmark::State& state) {
  const ScoreInput in = score_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(score_batch_serial(in.jobs, fixture_schema()));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * in.jobs.size()));
}

}  // namespace

BENCHMARK(BM_BuildIndex)->Arg(60)->Arg(600);
BENCHMARK(BM_BuildIndexSerial)->Arg(60)->Arg(600);
BENCHMARK(BM_SimilarityMatrix)->Arg(60)->Arg(600);
BENCHMARK(BM_SimilarityMatrixSerial)->Arg(60)->Arg(600);
BENCHMARK(BM_ScoreBatch)->Arg(60)->Arg(600);
BENCHMARK(BM_ScoreBatchSerial)->Arg(60)->Arg(600);

BENCHMARK_MAIN();
