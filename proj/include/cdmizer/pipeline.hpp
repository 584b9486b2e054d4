#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdmizer/backend.hpp"
#include "cdmizer/conformance.hpp"
#include "cdmizer/corpus.hpp"
#include "cdmizer/prompt.hpp"
#include "cdmizer/retrieval.hpp"
#include "cdmizer/schema.hpp"
#include "cdmizer/template.hpp"

namespace cdmizer {

// One (document, clause, mode) conversion result as persisted in a run.
struct GeneratedOutput {
  std::string doc_id;
  ClauseKind clause = ClauseKind::Mta;
  Mode mode = Mode::WithoutRag;
  std::string raw;
  std::optional<Json> parsed;  // present iff the last extraction succeeded
  ConformanceReport conformance;
  int attempts = 0;
  std::string backend;
  std::vector<std::string> retrieved;  // example doc ids, retrieval order
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  std::string prompt_version;
  std::string created_at;

  OutputKey key() const { return {doc_id, clause, mode}; }
  Json to_json() const;
  static GeneratedOutput from_json(const Json& doc);
};

struct ConversionSettings {
  std::size_t k = 3;
  int max_retries = 2;
  bool allow_inapplicable = false;
};

// Everything a conversion needs. The retriever may be null for runs that only
// use WithoutRag; `store`, when set, receives every finished output.
struct ConversionContext {
  const SchemaGraph* graph = nullptr;
  const std::map<ClauseKind, Template>* templates = nullptr;
  ExampleRetriever* retriever = nullptr;
  Gateway* gateway = nullptr;
  const PromptTemplate* prompt = &PromptTemplate::builtin();
  ConversionSettings settings;
  const RunStore* store = nullptr;
};

// retrieve (WithRag) -> assemble_prompt -> complete -> extract_json ->
// conformance, re-prompting with diagnostics up to settings.max_retries.
// Backend errors propagate; exhausted retries give a failed report.
GeneratedOutput convert_clause(const ContractDoc& doc, ClauseKind clause, Mode mode, const ConversionContext& ctx);

std::map<ClauseKind, Template> build_templates(const SchemaGraph& graph, const TargetRegistry& registry,
                                               const std::vector<ClauseKind>& clauses);

struct RunStats {
  std::size_t planned = 0;
  std::size_t skipped = 0;  // already persisted
  std::size_t converted = 0;
  std::size_t conformance_failed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // task id, error

  bool ok() const { return failures.empty(); }
};

// Converts every applicable (doc, clause, mode) not yet in ctx.store, with up
// to `parallelism` conversions in flight.
RunStats run_conversions(const Corpus& corpus, const std::vector<ClauseKind>& clauses,
                         const std::vector<Mode>& modes, const ConversionContext& ctx, std::size_t parallelism);

std::string utc_timestamp();

}  // namespace cdmizer
