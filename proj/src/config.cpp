#include "cdmizer/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "cdmizer/corpus.hpp"

namespace cdmizer {

std::string LlmSettings::resolved_backend() const {
  if (backend != "auto") return backend;
  return mock_dir.empty() ? "http" : "mock";
}

namespace {

void flatten(const std::string& prefix, const Json& value, std::vector<std::pair<std::string, Json>>& out) {
  if (value.is_object()) {
    for (const auto& [key, child] : value.items()) flatten(prefix.empty() ? key : prefix + "." + key, child, out);
  } else {
    out.emplace_back(prefix, value);
  }
}

template <typename T>
T as(const std::string& key, const Json& value) {
  try {
    return value.get<T>();
  } catch (const Json::exception&) {
    throw Error("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const std::string& key, const Json& value) {
  if (value.is_string()) return {value.get<std::string>()};
  return as<std::vector<std::string>>(key, value);
}

}  // namespace

void RunConfig::merge_json(const Json& doc) {
  if (!doc.is_object()) throw Error("config must be a JSON object");
  using Setter = std::function<void(const std::string&, const Json&)>;
  const std::map<std::string, Setter> setters = {
      {"schema", [this](auto& k, auto& v) { schema_path = as<std::string>(k, v); }},
      {"corpus", [this](auto& k, auto& v) { corpus_path = as<std::string>(k, v); }},
      {"targets", [this](auto& k, auto& v) { targets_path = as<std::string>(k, v); }},
      {"clauses",
       [this](auto& k, auto& v) {
         clauses.clear();
         for (const std::string& s : string_list(k, v)) {
           if (s == "all") {
             clauses.assign(kAllClauses.begin(), kAllClauses.end());
             break;
           }
           clauses.push_back(parse_clause(s));
         }
       }},
      {"modes",
       [this](auto& k, auto& v) {
         modes.clear();
         for (const std::string& s : string_list(k, v)) {
           if (s == "all" || s == "both") {
             modes.assign(kAllModes.begin(), kAllModes.end());
             break;
           }
           modes.push_back(parse_mode(s));
         }
       }},
      {"retrieval.k", [this](auto& k, auto& v) { retrieval.k = as<std::size_t>(k, v); }},
      {"retrieval.provider", [this](auto& k, auto& v) { retrieval.provider = as<std::string>(k, v); }},
      {"retrieval.endpoint", [this](auto& k, auto& v) { retrieval.endpoint = as<std::string>(k, v); }},
      {"retrieval.model", [this](auto& k, auto& v) { retrieval.model = as<std::string>(k, v); }},
      {"llm.backend", [this](auto& k, auto& v) { llm.backend = as<std::string>(k, v); }},
      {"llm.endpoint", [this](auto& k, auto& v) { llm.endpoint = as<std::string>(k, v); }},
      {"llm.model", [this](auto& k, auto& v) { llm.model = as<std::string>(k, v); }},
      {"llm.api_key", [this](auto& k, auto& v) { llm.api_key = as<std::string>(k, v); }},
      {"llm.max_retries", [this](auto& k, auto& v) { llm.max_retries = as<int>(k, v); }},
      {"llm.timeout_s", [this](auto& k, auto& v) { llm.timeout_s = as<double>(k, v); }},
      {"llm.max_in_flight", [this](auto& k, auto& v) { llm.max_in_flight = as<std::size_t>(k, v); }},
      {"llm.seed", [this](auto& k, auto& v) { llm.seed = as<int>(k, v); }},
      {"llm.prompt_file", [this](auto& k, auto& v) { llm.prompt_file = as<std::string>(k, v); }},
      {"llm.mock_dir", [this](auto& k, auto& v) { llm.mock_dir = as<std::string>(k, v); }},
      {"review.host", [this](auto& k, auto& v) { review.host = as<std::string>(k, v); }},
      {"review.port", [this](auto& k, auto& v) { review.port = as<int>(k, v); }},
      {"review.token", [this](auto& k, auto& v) { review.token = as<std::string>(k, v); }},
      {"review.ui_dir", [this](auto& k, auto& v) { review.ui_dir = as<std::string>(k, v); }},
      {"run_id", [this](auto& k, auto& v) { run_id = as<std::string>(k, v); }},
      {"output_dir", [this](auto& k, auto& v) { output_dir = as<std::string>(k, v); }},
      {"allow_inapplicable", [this](auto& k, auto& v) { allow_inapplicable = as<bool>(k, v); }},
  };

  std::vector<std::pair<std::string, Json>> entries;
  flatten("", doc, entries);
  for (const auto& [key, value] : entries) {
    if (key == "config_digest") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw Error("unknown config key '" + key + "'");
    if (value.is_null()) continue;
    it->second(key, value);
  }
}

void RunConfig::apply_env() {
  auto env = [](const char* name, std::string& target) {
    if (const char* value = std::getenv(name); value && *value) target = value;
  };
  env("CDMIZER_LLM_ENDPOINT", llm.endpoint);
  env("CDMIZER_LLM_MODEL", llm.model);
  env("CDMIZER_LLM_API_KEY", llm.api_key);
}

void RunConfig::validate() const {
  if (clauses.empty()) throw Error("no clauses selected");
  if (modes.empty()) throw Error("no modes selected");
  if (retrieval.k == 0) throw Error("retrieval.k must be at least 1");
  if (retrieval.provider != "lexical" && retrieval.provider != "external") {
    throw Error("retrieval.provider must be 'lexical' or 'external'");
  }
  if (retrieval.provider == "external" && retrieval.endpoint.empty()) {
    throw Error("retrieval.endpoint is required for the external provider");
  }
  const std::string backend = llm.resolved_backend();
  if (backend != "mock" && backend != "http") throw Error("llm.backend must be 'auto', 'mock' or 'http'");
  if (backend == "mock" && llm.mock_dir.empty()) throw Error("llm.mock_dir is required for the mock backend");
  if (backend == "http" && llm.endpoint.empty()) {
    throw Error("no LLM endpoint configured (set llm.endpoint, CDMIZER_LLM_ENDPOINT or llm.mock_dir)");
  }
  if (llm.max_retries < 0) throw Error("llm.max_retries must not be negative");
  if (llm.timeout_s <= 0) throw Error("llm.timeout_s must be positive");
  if (llm.max_in_flight == 0) throw Error("llm.max_in_flight must be at least 1");
  if (review.port < 0 || review.port > 65535) throw Error("review.port is out of range");
  if (!run_id.empty() && !is_valid_doc_id(run_id)) throw Error("run id '" + run_id + "' has invalid characters");
}

void RunConfig::resolve_paths(const std::filesystem::path& base) {
  auto fix = [&base](std::string& path) {
    if (!path.empty() && std::filesystem::path(path).is_relative()) {
      path = std::filesystem::weakly_canonical(base / path).string();
    }
  };
  fix(schema_path);
  fix(corpus_path);
  fix(targets_path);
  fix(llm.prompt_file);
  fix(llm.mock_dir);
  fix(review.ui_dir);
  fix(output_dir);
}

Json RunConfig::to_json() const {
  Json out = Json::object();
  out["schema"] = schema_path;
  out["corpus"] = corpus_path;
  out["targets"] = targets_path;
  Json c = Json::array();
  for (ClauseKind clause : clauses) c.push_back(clause_slug(clause));
  out["clauses"] = std::move(c);
  Json m = Json::array();
  for (Mode mode : modes) m.push_back(mode_slug(mode));
  out["modes"] = std::move(m);
  out["retrieval"] = {{"k", retrieval.k},
                      {"provider", retrieval.provider},
                      {"endpoint", retrieval.endpoint},
                      {"model", retrieval.model}};
  out["llm"] = {{"backend", llm.backend},
                {"endpoint", llm.endpoint},
                {"model", llm.model},
                {"api_key", llm.api_key.empty() ? "" : "<redacted>"},
                {"max_retries", llm.max_retries},
                {"timeout_s", llm.timeout_s},
                {"max_in_flight", llm.max_in_flight},
                {"seed", llm.seed},
                {"prompt_file", llm.prompt_file},
                {"mock_dir", llm.mock_dir}};
  out["run_id"] = run_id;
  out["output_dir"] = output_dir;
  out["allow_inapplicable"] = allow_inapplicable;
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string RunConfig::digest() const {
  Json doc = to_json();
  doc.erase("run_id");
  doc.erase("output_dir");
  return sha256_hex(doc.dump());
}

std::string RunConfig::effective_run_id() const { return run_id.empty() ? "run-" + digest().substr(0, 12) : run_id; }

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig config;
  try {
    config.merge_json(Json::parse(read_text_file(path)));
  } catch (const Json::parse_error& e) {
    throw Error("malformed config '" + path.string() + "': " + e.what());
  }
  config.resolve_paths(std::filesystem::absolute(path).parent_path());
  return config;
}

}  // namespace cdmizer
