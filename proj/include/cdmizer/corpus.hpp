#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdmizer/types.hpp"

namespace cdmizer {

class CorpusError : public Error {
 public:
  using Error::Error;
};

struct ContractDoc {
  std::string id;
  std::string text;
  std::map<ClauseKind, Json> ground_truth;  // absent when the clause does not apply

  bool applicable(ClauseKind clause) const { return ground_truth.count(clause) > 0; }
  const Json* truth(ClauseKind clause) const;

  bool operator==(const ContractDoc&) const = default;
};

// Immutable after load.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<ContractDoc> docs, Json manifest);

  const std::vector<ContractDoc>& docs() const { return docs_; }
  const Json& manifest() const { return manifest_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  const ContractDoc* find(std::string_view id) const;
  const ContractDoc& at(std::string_view id) const;
  std::size_t applicable_count(ClauseKind clause) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<ContractDoc> docs_;
  Json manifest_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Read-only view over a corpus minus one document. Must not outlive the corpus.
class CorpusView {
 public:
  CorpusView(const Corpus& corpus, std::vector<std::size_t> indices)
      : corpus_(&corpus), indices_(std::move(indices)) {}

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  const ContractDoc& operator[](std::size_t i) const { return corpus_->docs()[indices_[i]]; }
  bool contains(std::string_view id) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i : indices_) fn(corpus_->docs()[i]);
  }

 private:
  const Corpus* corpus_;
  std::vector<std::size_t> indices_;
};

bool is_valid_doc_id(std::string_view id);

// Layout: <dir>/manifest.json, <dir>/docs/<id>/contract.txt,
// <dir>/docs/<id>/truth/<clause>.json. Document order follows the manifest's
// "docs" list when present, else sorted directory names.
Corpus load_corpus(const std::filesystem::path& dir);

CorpusView leave_one_out(const Corpus& corpus, std::string_view excluded_id);

const std::vector<std::string>& clause_keywords(ClauseKind clause);

// Paragraphs (blank-line separated) mentioning any keyword of the clause,
// case-insensitively; the full text when none does.
std::string clause_excerpt(std::string_view text, ClauseKind clause);

// ---------------------------------------------------------------------------
// Run directory: <run>/outputs/<id>.<clause>.<mode>.json, <run>/config.json,
// <run>/report.json, <run>/report.md, <run>/manual_scores.jsonl.

struct OutputKey {
  std::string doc_id;
  ClauseKind clause = ClauseKind::Mta;
  Mode mode = Mode::WithRag;

  std::string str() const;  // "<id>.<clause>.<mode>", also the review task id
  static std::optional<OutputKey> parse(std::string_view text);

  auto operator<=>(const OutputKey&) const = default;
};

class RunStore {
 public:
  // Creates the directory layout when missing.
  static RunStore create(const std::filesystem::path& run_dir);
  // Requires an existing run directory.
  static RunStore open(const std::filesystem::path& run_dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::string run_id() const { return dir_.filename().string(); }

  std::filesystem::path output_path(const OutputKey& key) const;
  bool has_output(const OutputKey& key) const;
  // Written to a temporary file and renamed, so readers never see partial files.
  void write_output(const OutputKey& key, const Json& output) const;
  Json read_output(const OutputKey& key) const;
  std::vector<OutputKey> list_outputs() const;

  void write_config(const Json& config) const;
  std::optional<Json> read_config() const;

  std::filesystem::path report_json_path() const { return dir_ / "report.json"; }
  std::filesystem::path report_md_path() const { return dir_ / "report.md"; }
  std::filesystem::path manual_scores_path() const { return dir_ / "manual_scores.jsonl"; }

 private:
  explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::filesystem::path dir_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace cdmizer
