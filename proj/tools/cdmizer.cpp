#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cdmizer/backend.hpp"
#include "cdmizer/config.hpp"
#include "cdmizer/corpus.hpp"
#include "cdmizer/corpus_gen.hpp"
#include "cdmizer/evaluator.hpp"
#include "cdmizer/pipeline.hpp"
#include "cdmizer/prompt.hpp"
#include "cdmizer/retrieval.hpp"
#include "cdmizer/review.hpp"
#include "cdmizer/schema.hpp"
#include "cdmizer/template.hpp"

namespace fs = std::filesystem;
using namespace cdmizer;

namespace {

// Flag values collected before they are layered over the config file.
struct Flags {
  std::string config;
  std::optional<std::string> schema, corpus, targets, run_id, output_dir, prompt_file, mock_dir, backend,
      endpoint, model, provider, retrieval_endpoint, retrieval_model, host, token, ui_dir;
  std::vector<std::string> clauses, modes;
  std::optional<std::size_t> k, max_in_flight;
  std::optional<int> max_retries, port, seed;
  std::optional<double> timeout_s;
  bool allow_inapplicable = false;
};

RunConfig resolve_config(const Flags& flags) {
  RunConfig config = flags.config.empty() ? RunConfig{} : load_config(flags.config);
  auto path = [](const std::optional<std::string>& p) -> std::optional<std::string> {
    if (!p || p->empty()) return p;
    return fs::absolute(*p).lexically_normal().string();
  };
  Json overrides = Json::object();
  auto set = [&overrides](const char* key, const auto& value) {
    if (value) overrides[key] = *value;
  };
  set("schema", path(flags.schema));
  set("corpus", path(flags.corpus));
  set("targets", path(flags.targets));
  set("run_id", flags.run_id);
  set("output_dir", path(flags.output_dir));
  set("llm.prompt_file", path(flags.prompt_file));
  set("llm.mock_dir", path(flags.mock_dir));
  set("llm.backend", flags.backend);
  set("llm.endpoint", flags.endpoint);
  set("llm.model", flags.model);
  set("llm.max_retries", flags.max_retries);
  set("llm.max_in_flight", flags.max_in_flight);
  set("llm.timeout_s", flags.timeout_s);
  set("llm.seed", flags.seed);
  set("retrieval.k", flags.k);
  set("retrieval.provider", flags.provider);
  set("retrieval.endpoint", flags.retrieval_endpoint);
  set("retrieval.model", flags.retrieval_model);
  set("review.host", flags.host);
  set("review.port", flags.port);
  set("review.token", flags.token);
  set("review.ui_dir", path(flags.ui_dir));
  if (!flags.clauses.empty()) overrides["clauses"] = flags.clauses;
  if (!flags.modes.empty()) overrides["modes"] = flags.modes;
  if (flags.allow_inapplicable) overrides["allow_inapplicable"] = true;
  config.merge_json(overrides);
  config.apply_env();
  return config;
}

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
}

void add_run_options(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--schema", flags.schema, "Schema file (default: built-in CDM subset)");
  cmd->add_option("--corpus", flags.corpus, "Corpus directory");
  cmd->add_option("--targets", flags.targets, "Target registry overrides");
  cmd->add_option("--clause", flags.clauses, "Clause(s) to convert");
  cmd->add_option("--mode", flags.modes, "with-rag and/or without-rag");
  cmd->add_option("--k", flags.k, "Retrieved examples per prompt");
  cmd->add_option("--retrieval-provider", flags.provider, "lexical or external");
  cmd->add_option("--retrieval-endpoint", flags.retrieval_endpoint, "Embeddings endpoint");
  cmd->add_option("--retrieval-model", flags.retrieval_model, "Embeddings model");
  cmd->add_option("--backend", flags.backend, "auto, mock or http");
  cmd->add_option("--mock-dir", flags.mock_dir, "Canned responses for the mock backend");
  cmd->add_option("--endpoint", flags.endpoint, "Chat-completion endpoint");
  cmd->add_option("--model", flags.model, "Model name");
  cmd->add_option("--max-retries", flags.max_retries, "Re-prompts after a conformance failure");
  cmd->add_option("--max-in-flight", flags.max_in_flight, "Concurrent backend requests");
  cmd->add_option("--timeout", flags.timeout_s, "Request timeout in seconds");
  cmd->add_option("--seed", flags.seed, "Sampling seed sent to the backend");
  cmd->add_option("--prompt-file", flags.prompt_file, "Prompt wording file");
  cmd->add_option("--run-id", flags.run_id, "Run id (default: derived from the config)");
  cmd->add_option("--output-dir", flags.output_dir, "Directory holding runs");
  cmd->add_flag("--allow-inapplicable", flags.allow_inapplicable, "Also convert clauses without ground truth");
}

SchemaGraph load_graph(const RunConfig& config) {
  return config.schema_path.empty() ? fixture_schema() : load_schema_file(config.schema_path);
}

TargetRegistry load_registry(const RunConfig& config) {
  return config.targets_path.empty() ? TargetRegistry::builtin() : TargetRegistry::with_overrides(config.targets_path);
}

int cmd_template(const Flags& flags, const std::string& out) {
  const RunConfig config = resolve_config(flags);
  const SchemaGraph graph = load_graph(config);
  const TargetRegistry registry = load_registry(config);
  if (flags.clauses.size() == 1) {
    const ClauseKind clause = parse_clause(flags.clauses.front());
    const fs::path path = out.empty() ? fs::path(std::string(clause_slug(clause)) + ".template.json") : fs::path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file_atomic(path, render(generate_template(graph, registry.at(clause))));
    std::cout << path.string() << '\n';
    return 0;
  }
  const fs::path dir = out.empty() ? fs::path("templates") : fs::path(out);
  fs::create_directories(dir);
  for (ClauseKind clause : config.clauses) {
    const fs::path path = dir / (std::string(clause_slug(clause)) + ".template.json");
    write_text_file_atomic(path, render(generate_template(graph, registry.at(clause))));
    std::cout << path.string() << '\n';
  }
  return 0;
}

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.llm.resolved_backend() == "mock") return std::make_shared<MockBackend>(fs::path(config.llm.mock_dir));
  HttpBackendConfig http;
  http.endpoint = config.llm.endpoint;
  http.model = config.llm.model;
  http.api_key = config.llm.api_key;
  http.timeout_s = config.llm.timeout_s;
  http.seed = config.llm.seed;
  return std::make_shared<HttpChatBackend>(http);
}

int cmd_convert(const Flags& flags) {
  RunConfig config = resolve_config(flags);
  if (config.corpus_path.empty()) throw Error("no corpus configured (--corpus or 'corpus' in the config)");
  config.validate();

  const SchemaGraph graph = load_graph(config);
  const Corpus corpus = load_corpus(config.corpus_path);
  const auto templates = build_templates(graph, load_registry(config), config.clauses);
  const PromptTemplate prompt =
      config.llm.prompt_file.empty() ? PromptTemplate::builtin() : PromptTemplate::load(config.llm.prompt_file);

  std::unique_ptr<ExampleRetriever> retriever;
  if (std::find(config.modes.begin(), config.modes.end(), Mode::WithRag) != config.modes.end()) {
    if (config.retrieval.provider == "external") {
      retriever = std::make_unique<EmbeddingRetriever>(corpus, config.retrieval.endpoint, config.retrieval.model,
                                                       config.llm.api_key, config.llm.timeout_s);
    } else {
      retriever = std::make_unique<LexicalRetriever>(corpus);
    }
  }
  Gateway gateway(make_backend(config), config.llm.max_in_flight);

  const RunStore store = RunStore::create(config.run_dir());
  Json recorded = config.to_json();
  recorded["config_digest"] = config.digest();
  store.write_config(recorded);

  ConversionContext ctx;
  ctx.graph = &graph;
  ctx.templates = &templates;
  ctx.retriever = retriever.get();
  ctx.gateway = &gateway;
  ctx.prompt = &prompt;
  ctx.settings = {config.retrieval.k, config.llm.max_retries, config.allow_inapplicable};
  ctx.store = &store;

  const auto start = std::chrono::steady_clock::now();
  const RunStats stats = run_conversions(corpus, config.clauses, config.modes, ctx, config.llm.max_in_flight);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << fmt::format("run {}: {} planned, {} converted, {} already present, {} failed conformance, {} errors "
                           "({:.2f} s)\n",
                           store.dir().string(), stats.planned, stats.converted, stats.skipped,
                           stats.conformance_failed, stats.failures.size(), seconds);
  for (const auto& [task, error] : stats.failures) std::cerr << "error: " << task << ": " << error << '\n';
  return stats.ok() ? 0 : 1;
}

void write_report(const BenchmarkReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file_atomic(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_file_atomic(dir / "report.md", report.to_markdown());
}

int cmd_evaluate(const Flags& flags, const std::string& run, bool seed_paper, const std::string& manual,
                 const std::string& out) {
  if (seed_paper) {
    Provenance provenance{"published", "published scores", "", true};
    const BenchmarkReport report = emit_report(seed_published_scores(), provenance);
    write_report(report, out.empty() ? (run.empty() ? fs::path(".") : fs::path(run)) : fs::path(out));
    std::cout << report.to_markdown();
    return 0;
  }
  if (run.empty()) throw Error("--run is required unless --seed-paper-scores is given");
  const RunStore store = RunStore::open(run);
  const std::optional<Json> recorded = store.read_config();
  if (!recorded) throw Error("run '" + run + "' has no config.json");
  RunConfig config;
  config.merge_json(*recorded);
  if (!flags.config.empty() || flags.corpus || flags.schema) {
    const RunConfig overrides = resolve_config(flags);
    if (flags.corpus || !overrides.corpus_path.empty()) config.corpus_path = overrides.corpus_path;
    if (flags.schema || !overrides.schema_path.empty()) config.schema_path = overrides.schema_path;
  }
  const SchemaGraph graph = load_graph(config);
  const Corpus corpus = load_corpus(config.corpus_path);

  if (!manual.empty()) {
    ScoreStore probe = build_score_store(store, corpus, graph);
    const std::vector<EvaluationRecord> records = load_manual_file(manual);
    probe.ingest_manual(records);
    ManualScoreLog(store.manual_scores_path()).append(records);
    std::cout << "ingested " << records.size() << " manual score(s)\n";
  }

  const ScoreStore scores = build_score_store(store, corpus, graph);
  std::map<ClauseKind, std::size_t> applicable;
  for (ClauseKind clause : kAllClauses) applicable[clause] = corpus.applicable_count(clause);
  Provenance provenance{store.run_id(), config.llm.resolved_backend(), recorded->value("config_digest", ""), false};
  const BenchmarkReport report = emit_report(scores, provenance, applicable);
  write_report(report, out.empty() ? store.dir() : fs::path(out));
  std::cout << report.to_markdown();
  return 0;
}

int cmd_review(const Flags& flags, const std::string& runs_root) {
  const RunConfig config = resolve_config(flags);
  const fs::path root = runs_root.empty() ? fs::path(config.output_dir) : fs::path(runs_root);
  if (!fs::is_directory(root)) throw Error("runs directory '" + root.string() + "' does not exist");

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ReviewService service(root);
  ReviewServer server(service, config.review);
  const int port = server.bind();
  std::cout << "review service listening on http://" << config.review.host << ':' << port << "/ (runs in "
            << root.string() << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  waiter.join();
  std::cout << "review service stopped" << std::endl;
  return 0;
}

int cmd_corpus_gen(const std::string& out, std::size_t docs, std::size_t threshold_docs, std::uint32_t seed,
                   bool no_mock) {
  CorpusGenOptions options;
  options.docs = docs;
  options.threshold_docs = threshold_docs;
  options.seed = seed;
  const Corpus corpus = generate_fixture_corpus(options);
  write_corpus(corpus, out, !no_mock);
  std::cout << fmt::format("wrote {} documents ({} with threshold terms) to {}\n", corpus.size(),
                           corpus.applicable_count(ClauseKind::Threshold), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convert CSA clause text into CDM JSON and evaluate the results"};
  app.require_subcommand(1);
  Flags flags;

  auto* tmpl = app.add_subcommand("template", "Generate clause templates from a schema");
  std::string template_out;
  add_common(tmpl, flags);
  tmpl->add_option("--schema", flags.schema, "Schema file (default: built-in CDM subset)");
  tmpl->add_option("--clause", flags.clauses, "Single clause (default: all four)");
  tmpl->add_option("--targets", flags.targets, "Target registry overrides");
  tmpl->add_option("-o,--out", template_out, "Output file for one clause, directory otherwise");

  auto* convert = app.add_subcommand("convert", "Populate templates for every document, clause and mode");
  add_common(convert, flags);
  add_run_options(convert, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Score a run and write report.json and report.md");
  std::string eval_run, eval_manual, eval_out;
  bool seed_paper = false;
  add_common(evaluate, flags);
  evaluate->add_option("--run", eval_run, "Run directory");
  evaluate->add_option("--corpus", flags.corpus, "Corpus directory (default: the one recorded in the run)");
  evaluate->add_option("--schema", flags.schema, "Schema file (default: the one recorded in the run)");
  evaluate->add_option("--manual", eval_manual, "Manual scores (JSON lines or array) to ingest")
      ->check(CLI::ExistingFile);
  evaluate->add_option("-o,--out", eval_out, "Report directory (default: the run directory)");
  evaluate->add_flag("--seed-paper-scores", seed_paper, "Report the published CDMizer scores");

  auto* review = app.add_subcommand("review", "Serve the manual review API and UI");
  std::string runs_root;
  add_common(review, flags);
  review->add_option("--runs", runs_root, "Directory holding runs (default: output_dir)");
  review->add_option("--host", flags.host, "Bind address");
  review->add_option("--port", flags.port, "Port (0 picks a free one)");
  review->add_option("--token", flags.token, "Require this bearer token");
  review->add_option("--ui-dir", flags.ui_dir, "Built review UI to serve at /");

  auto* gen = app.add_subcommand("corpus-gen", "Write the synthetic fixture corpus");
  std::string gen_out;
  std::size_t gen_docs = 60, gen_threshold = 37;
  std::uint32_t gen_seed = CorpusGenOptions{}.seed;
  bool no_mock = false;
  add_common(gen, flags);
  gen->add_option("-o,--out", gen_out, "Output directory")->required();
  gen->add_option("--docs", gen_docs, "Number of documents");
  gen->add_option("--threshold-docs", gen_threshold, "Documents carrying threshold terms");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_flag("--no-mock", no_mock, "Skip the canned mock responses");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tmpl) return cmd_template(flags, template_out);
    if (*convert) return cmd_convert(flags);
    if (*evaluate) return cmd_evaluate(flags, eval_run, seed_paper, eval_manual, eval_out);
    if (*review) return cmd_review(flags, runs_root);
    if (*gen) return cmd_corpus_gen(gen_out, gen_docs, gen_threshold, gen_seed, no_mock);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
