#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cdmizer/types.hpp"

namespace cdmizer {

struct RetrievalSettings {
  std::size_t k = 3;
  std::string provider = "lexical";  // lexical | external
  std::string endpoint;
  std::string model;
};

struct LlmSettings {
  std::string backend = "auto";  // auto | mock | http
  std::string endpoint;
  std::string model;
  std::string api_key;
  int max_retries = 2;
  double timeout_s = 120.0;
  std::size_t max_in_flight = 4;
  int seed = 0;
  std::string prompt_file;
  std::string mock_dir;

  // "auto" picks mock when mock_dir is set, else http.
  std::string resolved_backend() const;
};

struct ReviewSettings {
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string token;
  std::string ui_dir;
};

// Precedence: config file, then command-line flags, then environment.
struct RunConfig {
  std::string schema_path;   // empty: compiled-in fixture schema
  std::string corpus_path;
  std::string targets_path;  // empty: compiled-in registry
  std::vector<ClauseKind> clauses{kAllClauses.begin(), kAllClauses.end()};
  std::vector<Mode> modes{kAllModes.begin(), kAllModes.end()};
  RetrievalSettings retrieval;
  LlmSettings llm;
  ReviewSettings review;
  std::string run_id;  // empty: derived from the config digest
  std::string output_dir = "runs";
  bool allow_inapplicable = false;

  // Accepts nested objects or dotted keys ("llm.max_retries"); unknown keys
  // are rejected.
  void merge_json(const Json& doc);
  // CDMIZER_LLM_ENDPOINT, CDMIZER_LLM_MODEL, CDMIZER_LLM_API_KEY.
  void apply_env();
  void validate() const;

  // Relative paths made absolute against `base`.
  void resolve_paths(const std::filesystem::path& base);

  // Secrets redacted; suitable for writing into a run directory.
  Json to_json() const;
  // SHA-256 of the redacted config, excluding run id and output dir.
  std::string digest() const;
  std::string effective_run_id() const;
  std::filesystem::path run_dir() const { return std::filesystem::path(output_dir) / effective_run_id(); }
};

RunConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

}  // namespace cdmizer
