#include "cdmizer/review.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <shared_mutex>

#include <httplib.h>

#include "cdmizer/corpus.hpp"
#include "cdmizer/evaluator.hpp"
#include "cdmizer/pipeline.hpp"
#include "cdmizer/schema.hpp"

namespace cdmizer {

struct ReviewService::RunState {
  RunStore store;
  Corpus corpus;
  SchemaGraph graph;
  ScoreStore scores;
  Provenance provenance;
  std::map<ClauseKind, std::size_t> applicable;
  std::shared_mutex mutex;

  explicit RunState(RunStore s) : store(std::move(s)) {}
};

ReviewService::ReviewService(std::filesystem::path runs_root) : root_(std::move(runs_root)) {}

ReviewService::~ReviewService() = default;

std::shared_ptr<ReviewService::RunState> ReviewService::run(const std::string& run_id) {
  std::lock_guard lock(mutex_);
  if (auto it = runs_.find(run_id); it != runs_.end()) return it->second;
  if (!is_valid_doc_id(run_id) || !std::filesystem::is_directory(root_ / run_id)) {
    throw NotFound("unknown run '" + run_id + "'");
  }
  auto state = std::make_shared<RunState>(RunStore::open(root_ / run_id));
  const std::optional<Json> config_doc = state->store.read_config();
  if (!config_doc) throw Error("run '" + run_id + "' has no config.json");
  RunConfig config;
  config.merge_json(*config_doc);
  if (config.corpus_path.empty()) throw Error("run '" + run_id + "' does not record its corpus");
  state->corpus = load_corpus(config.corpus_path);
  state->graph = config.schema_path.empty() ? fixture_schema() : load_schema_file(config.schema_path);
  state->scores = build_score_store(state->store, state->corpus, state->graph);
  state->provenance = {run_id, config.llm.resolved_backend(), config_doc->value("config_digest", config.digest()),
                       false};
  for (ClauseKind clause : kAllClauses) state->applicable[clause] = state->corpus.applicable_count(clause);
  runs_.emplace(run_id, state);
  return state;
}

namespace {

OutputKey parse_task_id(const std::string& task_id) {
  auto key = OutputKey::parse(task_id);
  if (!key) throw BadRequest("malformed task id '" + task_id + "'");
  return *key;
}

Json optional_number(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

Json running_mean(const ScoreStore& scores, ClauseKind clause, Mode mode) {
  const ClauseAggregate summary = scores.summarize(clause, mode);
  return {{"clause", clause_slug(clause)},
          {"mode", mode_slug(mode)},
          {"mean", optional_number(summary.mean)},
          {"records", summary.records},
          {"manual", summary.manual}};
}

}  // namespace

Json ReviewService::list_tasks(const std::string& run_id, const TaskFilter& filter) {
  if (filter.page == 0 || filter.page_size == 0) throw BadRequest("page and page_size start at 1");
  auto state = run(run_id);
  std::shared_lock lock(state->mutex);
  std::vector<OutputKey> selected;
  for (const OutputKey& key : state->scores.keys()) {
    if (filter.clause && key.clause != *filter.clause) continue;
    if (filter.mode && key.mode != *filter.mode) continue;
    if (filter.scored && state->scores.is_scored(key) != *filter.scored) continue;
    selected.push_back(key);
  }
  Json tasks = Json::array();
  const std::size_t first = (filter.page - 1) * filter.page_size;
  for (std::size_t i = first; i < selected.size() && i < first + filter.page_size; ++i) {
    const OutputKey& key = selected[i];
    tasks.push_back({{"task_id", key.str()},
                     {"doc_id", key.doc_id},
                     {"clause", clause_slug(key.clause)},
                     {"mode", mode_slug(key.mode)},
                     {"status", state->scores.is_scored(key) ? "scored" : "pending"},
                     {"auto_score", optional_number(state->scores.auto_score(key))},
                     {"manual_score", optional_number(state->scores.manual_score(key))}});
  }
  return {{"run", run_id},
          {"total", selected.size()},
          {"page", filter.page},
          {"page_size", filter.page_size},
          {"tasks", std::move(tasks)}};
}

Json ReviewService::get_task(const std::string& run_id, const std::string& task_id) {
  const OutputKey key = parse_task_id(task_id);
  auto state = run(run_id);
  std::shared_lock lock(state->mutex);
  if (!state->scores.contains(key)) throw NotFound("unknown task '" + task_id + "'");
  const ContractDoc& doc = state->corpus.at(key.doc_id);
  const GeneratedOutput out = GeneratedOutput::from_json(state->store.read_output(key));
  const Json& truth = *doc.truth(key.clause);
  const AutoScore detail = out.parsed ? auto_score(*out.parsed, truth, state->graph) : AutoScore{};
  return {{"task_id", key.str()},
          {"doc_id", key.doc_id},
          {"clause", clause_slug(key.clause)},
          {"clause_name", clause_display_name(key.clause)},
          {"mode", mode_slug(key.mode)},
          {"status", state->scores.is_scored(key) ? "scored" : "pending"},
          {"contract_excerpt", clause_excerpt(doc.text, key.clause)},
          {"generated", out.parsed ? *out.parsed : Json(nullptr)},
          {"raw", out.raw},
          {"truth", truth},
          {"conformance", out.conformance.to_json()},
          {"auto_score", optional_number(state->scores.auto_score(key))},
          {"auto_detail",
           {{"matched", detail.matched},
            {"truth_leaves", detail.truth_leaves},
            {"generated_leaves", detail.generated_leaves},
            {"diagnostic", detail.diagnostic}}},
          {"manual_score", optional_number(state->scores.manual_score(key))}};
}

Json ReviewService::submit_score(const std::string& run_id, const std::string& task_id, const Json& body) {
  const OutputKey key = parse_task_id(task_id);
  if (!body.is_object()) throw BadRequest("body must be a JSON object");
  auto score = body.find("score");
  if (score == body.end() || !score->is_number()) throw BadRequest("'score' must be a number");
  auto scorer = body.find("scorer");
  if (scorer == body.end() || !scorer->is_string()) throw BadRequest("'scorer' must be a string");

  EvaluationRecord record;
  record.doc_id = key.doc_id;
  record.clause = key.clause;
  record.mode = key.mode;
  record.manual_score = score->get<double>();
  record.scorer = scorer->get<std::string>();
  record.timestamp = utc_timestamp();
  try {
    ScoreStore::validate_manual(record);
  } catch (const Error& e) {
    throw BadRequest(e.what());
  }

  auto state = run(run_id);
  std::unique_lock lock(state->mutex);
  if (!state->scores.contains(key)) throw NotFound("unknown task '" + task_id + "'");
  record.auto_score = state->scores.auto_score(key);
  ManualScoreLog(state->store.manual_scores_path()).append({record});
  state->scores.ingest_manual({record});
  return {{"task_id", key.str()},
          {"status", "scored"},
          {"score", *record.manual_score},
          {"scorer", record.scorer},
          {"manual_score", optional_number(state->scores.manual_score(key))},
          {"running_mean", running_mean(state->scores, key.clause, key.mode)}};
}

Json ReviewService::report(const std::string& run_id) {
  auto state = run(run_id);
  std::shared_lock lock(state->mutex);
  return emit_report(state->scores, state->provenance, state->applicable).to_json();
}

TaskFilter parse_task_filter(const std::multimap<std::string, std::string>& params) {
  TaskFilter filter;
  auto size = [](const std::string& name, const std::string& value) -> std::size_t {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(value, &used);
      if (used != value.size() || n < 1 || n > 1000) throw BadRequest("");
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw BadRequest("'" + name + "' must be an integer between 1 and 1000");
    }
  };
  for (const auto& [name, value] : params) {
    try {
      if (name == "status") {
        if (value == "scored") {
          filter.scored = true;
        } else if (value == "pending") {
          filter.scored = false;
        } else if (value != "all") {
          throw BadRequest("status must be 'pending', 'scored' or 'all'");
        }
      } else if (name == "clause") {
        filter.clause = parse_clause(value);
      } else if (name == "mode") {
        filter.mode = parse_mode(value);
      } else if (name == "page") {
        filter.page = size(name, value);
      } else if (name == "page_size") {
        filter.page_size = size(name, value);
      }
    } catch (const BadRequest&) {
      throw;
    } catch (const Error& e) {
      throw BadRequest(e.what());
    }
  }
  return filter;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>CDMizer review</title></head>\n"
    "<body><h1>CDMizer review service</h1>\n"
    "<p>No review UI build is configured (set <code>review.ui_dir</code>). The JSON API is available under "
    "<code>/runs/{run}/tasks</code>.</p></body></html>\n";

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    send_json(res, 200, fn());
  } catch (const NotFound& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const BadRequest& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

struct ReviewServer::Impl {
  Impl(ReviewService& s, ReviewSettings settings_in) : service(s), settings(std::move(settings_in)) {}

  ReviewService& service;
  ReviewSettings settings;
  httplib::Server server;
  bool bound = false;
  std::atomic<bool> serving{false};
  std::atomic<bool> stop_requested{false};
};

ReviewServer::ReviewServer(ReviewService& service, ReviewSettings settings)
    : impl_(std::make_unique<Impl>(service, std::move(settings))) {
  httplib::Server& server = impl_->server;
  ReviewService& svc = impl_->service;

  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  if (!impl_->settings.token.empty()) {
    const std::string expected = impl_->settings.token;
    server.set_pre_routing_handler([expected](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/runs/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
      if (httplib::get_bearer_token_auth(req) == expected) return httplib::Server::HandlerResponse::Unhandled;
      send_json(res, 401, {{"error", "missing or invalid bearer token"}});
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  server.Get(R"(/runs/([^/]+)/tasks)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.list_tasks(req.matches[1], parse_task_filter(req.params)); });
  });
  server.Get(R"(/runs/([^/]+)/tasks/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.get_task(req.matches[1], req.matches[2]); });
  });
  server.Post(R"(/runs/([^/]+)/tasks/([^/]+)/score)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      Json body;
      try {
        body = Json::parse(req.body);
      } catch (const Json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON body: ") + e.what());
      }
      return svc.submit_score(req.matches[1], req.matches[2], body);
    });
  });
  server.Get(R"(/runs/([^/]+)/report)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.report(req.matches[1]); });
  });

  const std::string& ui_dir = impl_->settings.ui_dir;
  if (!ui_dir.empty()) {
    if (!server.set_mount_point("/", ui_dir)) throw Error("review UI directory '" + ui_dir + "' does not exist");
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  const std::string& host = impl_->settings.host;
  int port = impl_->settings.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(host);
    if (port < 0) throw Error("cannot bind review service to " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind review service to " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  impl_->bound = true;
  return port;
}

void ReviewServer::serve() {
  if (!impl_->bound) bind();
  impl_->serving = true;
  if (impl_->stop_requested) return;
  impl_->server.listen_after_bind();
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->stop_requested = true;
  if (!impl_->serving) return;
  impl_->server.wait_until_ready();
  impl_->server.stop();
}

}  // namespace cdmizer
