#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdmizer/corpus.hpp"
#include "cdmizer/schema.hpp"
#include "cdmizer/types.hpp"

namespace cdmizer {

// Leaf-level agreement between a generated value and its ground truth.
struct AutoScore {
  double score = 0.0;  // 0..100
  std::size_t matched = 0;
  std::size_t truth_leaves = 0;
  std::size_t generated_leaves = 0;
  std::string diagnostic;  // set when normalization failed

  // Generated leaves that earned no credit.
  std::size_t extraneous() const { return generated_leaves - matched; }
};

// Both sides are normalized first. Each truth leaf scores when the generated
// value holds an equal scalar at the same path; array entries are paired by a
// maximum-weight assignment. An empty truth scores 100.
AutoScore auto_score(const Json& generated, const Json& truth, const SchemaGraph& graph);

// Number of scalar leaves in a JSON value.
std::size_t count_leaves(const Json& value);

struct ScoreJob {
  const Json* generated = nullptr;  // null scores 0
  const Json* truth = nullptr;
};

// OpenMP kernel over independent jobs; the serial variant is the reference.
std::vector<AutoScore> score_batch(const std::vector<ScoreJob>& jobs, const SchemaGraph& graph);
std::vector<AutoScore> score_batch_serial(const std::vector<ScoreJob>& jobs, const SchemaGraph& graph);

// ---------------------------------------------------------------------------

inline constexpr std::string_view kAutoScorer = "auto";

struct EvaluationRecord {
  std::string doc_id;
  ClauseKind clause = ClauseKind::Mta;
  Mode mode = Mode::WithRag;
  std::optional<double> auto_score;
  std::optional<double> manual_score;
  std::string scorer = std::string(kAutoScorer);
  std::string timestamp;

  OutputKey key() const { return {doc_id, clause, mode}; }
  Json to_json() const;
  static EvaluationRecord from_json(const Json& doc);
};

struct ClauseAggregate {
  std::optional<double> mean;
  std::size_t records = 0;
  std::size_t manual = 0;
};

// Per-task automatic and manual scores. Not synchronized; callers serialize
// writers.
class ScoreStore {
 public:
  // Registers the task and sets its automatic score.
  void set_auto(const OutputKey& key, double score);
  bool contains(const OutputKey& key) const { return tasks_.count(key) > 0; }

  // All-or-nothing: the whole batch is validated before anything is applied.
  // Scores must lie in [0, 100], tasks must be known, scorers non-empty and not
  // "auto", and (task, scorer) unique within the batch. A later submission by
  // the same scorer replaces the earlier one.
  void ingest_manual(const std::vector<EvaluationRecord>& records);
  static void validate_manual(const EvaluationRecord& record);

  std::optional<double> auto_score(const OutputKey& key) const;
  // Mean over scorers, when any manual score exists.
  std::optional<double> manual_score(const OutputKey& key) const;
  // Manual when present, else automatic.
  std::optional<double> effective(const OutputKey& key) const;
  bool is_scored(const OutputKey& key) const { return manual_.count(key) > 0; }

  // Mean of effective scores over (clause, mode), rounded half-up to 2
  // decimals. Throws when there are no records.
  double aggregate(ClauseKind clause, Mode mode) const;
  ClauseAggregate summarize(ClauseKind clause, Mode mode) const;

  std::vector<OutputKey> keys() const;
  std::size_t size() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }

 private:
  std::map<OutputKey, std::optional<double>> tasks_;
  std::map<OutputKey, std::map<std::string, double>> manual_;
};

double round_half_up_2(double value);

// JSON-lines file of manual EvaluationRecords. Appends are flushed to disk
// before returning.
class ManualScoreLog {
 public:
  explicit ManualScoreLog(std::filesystem::path path) : path_(std::move(path)) {}

  void append(const std::vector<EvaluationRecord>& records) const;
  std::vector<EvaluationRecord> load() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::vector<EvaluationRecord> load_manual_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct ReferenceRow {
  std::string model;
  std::string params;
  std::array<double, 4> scores{};  // kAllClauses order
};

struct ReferenceScoreTable {
  Mode mode = Mode::WithRag;
  std::string title;
  std::vector<ReferenceRow> rows;
  std::optional<ReferenceRow> published;
  std::optional<std::array<int, 4>> published_ranks;

  double score(std::size_t row, ClauseKind clause) const;
};

std::size_t clause_column(ClauseKind clause);

std::vector<ReferenceScoreTable> reference_tables_from_json(const Json& doc);
const ReferenceScoreTable& reference_table(Mode mode);

// 1 + number of reference rows scoring strictly higher.
int rank_against_reference(double score, const ReferenceScoreTable& table, ClauseKind clause);

std::string ordinal(int n);

// ---------------------------------------------------------------------------

struct ReportCell {
  std::optional<double> mean;
  std::optional<int> rank;
  std::size_t evaluated = 0;
  std::size_t manual = 0;
  std::size_t applicable = 0;
};

struct Provenance {
  std::string run_id;
  std::string backend;
  std::string config_digest;
  bool seeded = false;  // published scores rather than run data
};

struct BenchmarkReport {
  Provenance provenance;
  std::map<Mode, std::map<ClauseKind, ReportCell>> cells;

  Json to_json() const;
  std::string to_markdown() const;
};

// Ranks are only computed for cells with at least one record.
BenchmarkReport emit_report(const ScoreStore& store, const Provenance& provenance,
                            const std::map<ClauseKind, std::size_t>& applicable = {});

// One record per (clause, mode) carrying the published CDMizer scores.
ScoreStore seed_published_scores();

// Scores every persisted output of a run against corpus truth and replays the
// run's manual score log.
ScoreStore build_score_store(const RunStore& run, const Corpus& corpus, const SchemaGraph& graph);

}  // namespace cdmizer
