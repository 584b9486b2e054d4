#include "cdmizer/pipeline.hpp"

#include <chrono>
#include <ctime>

#include <omp.h>

#include "cdmizer/extract.hpp"

namespace cdmizer {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

Json GeneratedOutput::to_json() const {
  Json out = Json::object();
  out["doc_id"] = doc_id;
  out["clause"] = clause_slug(clause);
  out["mode"] = mode_slug(mode);
  out["backend"] = backend;
  out["attempts"] = attempts;
  out["retrieved"] = retrieved;
  out["raw"] = raw;
  out["parsed"] = parsed ? *parsed : Json(nullptr);
  out["conformance"] = conformance.to_json();
  out["latency_ms"] = latency_ms;
  out["prompt_tokens"] = prompt_tokens ? Json(*prompt_tokens) : Json(nullptr);
  out["completion_tokens"] = completion_tokens ? Json(*completion_tokens) : Json(nullptr);
  out["prompt_version"] = prompt_version;
  out["created_at"] = created_at;
  return out;
}

GeneratedOutput GeneratedOutput::from_json(const Json& doc) {
  GeneratedOutput out;
  out.doc_id = doc.at("doc_id").get<std::string>();
  out.clause = parse_clause(doc.at("clause").get<std::string>());
  out.mode = parse_mode(doc.at("mode").get<std::string>());
  out.backend = doc.value("backend", "");
  out.attempts = doc.at("attempts").get<int>();
  out.retrieved = doc.value("retrieved", std::vector<std::string>{});
  out.raw = doc.value("raw", "");
  if (auto it = doc.find("parsed"); it != doc.end() && !it->is_null()) out.parsed = *it;
  out.conformance = ConformanceReport::from_json(doc.at("conformance"));
  out.latency_ms = doc.value("latency_ms", 0.0);
  if (auto it = doc.find("prompt_tokens"); it != doc.end() && !it->is_null()) out.prompt_tokens = it->get<int>();
  if (auto it = doc.find("completion_tokens"); it != doc.end() && !it->is_null()) {
    out.completion_tokens = it->get<int>();
  }
  out.prompt_version = doc.value("prompt_version", "");
  out.created_at = doc.value("created_at", "");
  return out;
}

std::map<ClauseKind, Template> build_templates(const SchemaGraph& graph, const TargetRegistry& registry,
                                               const std::vector<ClauseKind>& clauses) {
  std::map<ClauseKind, Template> out;
  for (ClauseKind clause : clauses) out.emplace(clause, generate_template(graph, registry.at(clause)));
  return out;
}

namespace {

std::string diagnostics_text(const std::vector<Violation>& violations) {
  std::string out;
  std::size_t shown = 0;
  for (const Violation& v : violations) {
    if (shown++ == 20) {
      out += "- ... " + std::to_string(violations.size() - 20) + " more\n";
      break;
    }
    out += "- " + v.path + ": " + v.rule + " (" + v.detail + ")\n";
  }
  return out;
}

}  // namespace

GeneratedOutput convert_clause(const ContractDoc& doc, ClauseKind clause, Mode mode, const ConversionContext& ctx) {
  if (!ctx.graph || !ctx.templates || !ctx.gateway || !ctx.prompt) {
    throw Error("conversion context is incomplete");
  }
  if (!doc.applicable(clause) && !ctx.settings.allow_inapplicable) {
    throw Error("clause '" + std::string(clause_slug(clause)) + "' does not apply to document '" + doc.id + "'");
  }
  auto tmpl_it = ctx.templates->find(clause);
  if (tmpl_it == ctx.templates->end()) throw Error("no template for clause '" + std::string(clause_slug(clause)) + "'");
  const Template& tmpl = tmpl_it->second;

  std::vector<RetrievedExample> examples;
  if (mode == Mode::WithRag) {
    if (!ctx.retriever) throw Error("with-rag conversion requires a retriever");
    examples = ctx.retriever->retrieve(doc, clause, ctx.settings.k);
  }
  const PromptBundle bundle = assemble_prompt(tmpl, *ctx.graph, doc, examples, mode, *ctx.prompt);

  GeneratedOutput out;
  out.doc_id = doc.id;
  out.clause = clause;
  out.mode = mode;
  out.backend = ctx.gateway->backend_id();
  out.prompt_version = bundle.prompt_version;
  for (const RetrievedExample& ex : examples) out.retrieved.push_back(ex.doc_id);

  std::vector<ChatMessage> messages = initial_messages(bundle);
  const int max_attempts = ctx.settings.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const Completion completion = ctx.gateway->complete(ChatRequest{bundle.meta, messages, attempt});
    out.raw = completion.text;
    out.attempts = attempt;
    out.latency_ms += completion.latency_ms;
    if (completion.prompt_tokens) out.prompt_tokens = out.prompt_tokens.value_or(0) + *completion.prompt_tokens;
    if (completion.completion_tokens) {
      out.completion_tokens = out.completion_tokens.value_or(0) + *completion.completion_tokens;
    }

    std::string diagnostics;
    try {
      Json parsed = extract_json(completion.text);
      out.conformance = check_conformance(parsed, *ctx.graph, tmpl);
      out.parsed = std::move(parsed);
      if (out.conformance.passed()) break;
      diagnostics = diagnostics_text(out.conformance.violations);
    } catch (const ExtractError& e) {
      out.parsed.reset();
      out.conformance = ConformanceReport{};
      out.conformance.schema_ok = false;
      out.conformance.template_ok = false;
      const char* rule = e.kind() == ExtractError::Kind::NoJsonObject ? "no json object" : "invalid json";
      out.conformance.violations.push_back({"/", rule, e.what()});
      diagnostics = std::string("- ") + e.what() + "\n";
    }
    if (attempt < max_attempts) {
      messages.push_back({"assistant", completion.text});
      messages.push_back({"user", fill_variables(ctx.prompt->retry, {{"diagnostics", diagnostics}})});
    }
  }

  out.created_at = utc_timestamp();
  if (ctx.store) ctx.store->write_output(out.key(), out.to_json());
  return out;
}

RunStats run_conversions(const Corpus& corpus, const std::vector<ClauseKind>& clauses,
                         const std::vector<Mode>& modes, const ConversionContext& ctx, std::size_t parallelism) {
  struct Job {
    const ContractDoc* doc;
    ClauseKind clause;
    Mode mode;
  };
  RunStats stats;
  std::vector<Job> jobs;
  for (const ContractDoc& doc : corpus.docs()) {
    for (ClauseKind clause : clauses) {
      if (!doc.applicable(clause) && !ctx.settings.allow_inapplicable) continue;
      for (Mode mode : modes) {
        ++stats.planned;
        if (ctx.store && ctx.store->has_output({doc.id, clause, mode})) {
          ++stats.skipped;
          continue;
        }
        jobs.push_back({&doc, clause, mode});
      }
    }
  }

  const int threads = static_cast<int>(parallelism == 0 ? 1 : parallelism);
  const auto n = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const Job& job = jobs[i];
    try {
      const GeneratedOutput out = convert_clause(*job.doc, job.clause, job.mode, ctx);
#pragma omp critical(run_stats)
      {
        ++stats.converted;
        if (!out.conformance.passed()) ++stats.conformance_failed;
      }
    } catch (const std::exception& e) {
#pragma omp critical(run_stats)
      stats.failures.emplace_back(OutputKey{job.doc->id, job.clause, job.mode}.str(), e.what());
    }
  }
  std::sort(stats.failures.begin(), stats.failures.end());
  return stats;
}

}  // namespace cdmizer
