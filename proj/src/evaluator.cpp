#include "cdmizer/evaluator.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cdmizer/assets.hpp"
#include "cdmizer/conformance.hpp"
#include "cdmizer/pipeline.hpp"

namespace cdmizer {

namespace {

// Maximum-weight assignment of rows to distinct columns (rows <= cols),
// Hungarian method on the negated weights.
long long max_assignment(const std::vector<std::vector<long long>>& weight) {
  const std::size_t n = weight.size();
  const std::size_t m = n == 0 ? 0 : weight[0].size();
  if (n == 0 || m == 0) return 0;
  if (n > m) {
    std::vector<std::vector<long long>> transposed(m, std::vector<long long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) transposed[j][i] = weight[i][j];
    }
    return max_assignment(transposed);
  }

  long long top = 0;
  for (const auto& row : weight) top = std::max(top, *std::max_element(row.begin(), row.end()));
  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  auto cost = [&](std::size_t i, std::size_t j) { return top - weight[i - 1][j - 1]; };

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<long long> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      long long delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const long long cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  long long total = 0;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) total += weight[p[j] - 1][j - 1];
  }
  return total;
}

std::size_t matched_leaves(const Json& generated, const Json& truth) {
  if (truth.is_object()) {
    if (!generated.is_object()) return 0;
    std::size_t total = 0;
    for (const auto& [key, value] : truth.items()) {
      if (auto it = generated.find(key); it != generated.end()) total += matched_leaves(*it, value);
    }
    return total;
  }
  if (truth.is_array()) {
    if (!generated.is_array() || generated.empty() || truth.empty()) return 0;
    std::vector<std::vector<long long>> weight(truth.size(), std::vector<long long>(generated.size()));
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (std::size_t j = 0; j < generated.size(); ++j) {
        weight[i][j] = static_cast<long long>(matched_leaves(generated[j], truth[i]));
      }
    }
    return static_cast<std::size_t>(max_assignment(weight));
  }
  return generated == truth ? 1 : 0;
}

std::string first_violation(const std::vector<Violation>& violations) {
  const Violation& v = violations.front();
  return v.path + ": " + v.rule + " (" + v.detail + ")";
}

}  // namespace

std::size_t count_leaves(const Json& value) {
  if (value.is_object() || value.is_array()) {
    std::size_t total = 0;
    for (const auto& child : value) total += count_leaves(child);
    return total;
  }
  return 1;
}

AutoScore auto_score(const Json& generated, const Json& truth, const SchemaGraph& graph) {
  AutoScore out;
  NormalizeResult t = normalize(truth, graph);
  out.truth_leaves = count_leaves(t.value);
  if (!t.violations.empty()) {
    out.diagnostic = "ground truth does not normalize: " + first_violation(t.violations);
    return out;
  }
  NormalizeResult g = normalize(generated, graph);
  out.generated_leaves = count_leaves(g.value);
  if (!g.violations.empty()) {
    out.diagnostic = "generated output does not normalize: " + first_violation(g.violations);
    return out;
  }
  out.matched = matched_leaves(g.value, t.value);
  out.score = out.truth_leaves == 0 ? 100.0 : 100.0 * static_cast<double>(out.matched) / out.truth_leaves;
  return out;
}

namespace {

AutoScore score_job(const ScoreJob& job, const SchemaGraph& graph) {
  if (!job.truth) throw Error("score job without ground truth");
  if (!job.generated) {
    AutoScore out;
    out.truth_leaves = count_leaves(*job.truth);
    out.diagnostic = "no parsed output";
    return out;
  }
  return auto_score(*job.generated, *job.truth, graph);
}

}  // namespace

std::vector<AutoScore> score_batch(const std::vector<ScoreJob>& jobs, const SchemaGraph& graph) {
  std::vector<AutoScore> out(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[i] = score_job(jobs[i], graph);
    } catch (const std::exception& e) {
#pragma omp critical(score_batch_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw Error(error);
  return out;
}

std::vector<AutoScore> score_batch_serial(const std::vector<ScoreJob>& jobs, const SchemaGraph& graph) {
  std::vector<AutoScore> out;
  out.reserve(jobs.size());
  for (const ScoreJob& job : jobs) out.push_back(score_job(job, graph));
  return out;
}

// ---------------------------------------------------------------------------

Json EvaluationRecord::to_json() const {
  Json out = Json::object();
  out["doc_id"] = doc_id;
  out["clause"] = clause_slug(clause);
  out["mode"] = mode_slug(mode);
  out["auto_score"] = auto_score ? Json(*auto_score) : Json(nullptr);
  out["manual_score"] = manual_score ? Json(*manual_score) : Json(nullptr);
  out["scorer"] = scorer;
  out["timestamp"] = timestamp;
  return out;
}

EvaluationRecord EvaluationRecord::from_json(const Json& doc) {
  try {
    EvaluationRecord out;
    if (auto id = doc.find("task_id"); id != doc.end() && !doc.contains("doc_id")) {
      auto key = OutputKey::parse(id->get<std::string>());
      if (!key) throw Error("malformed task id '" + id->get<std::string>() + "'");
      out.doc_id = key->doc_id;
      out.clause = key->clause;
      out.mode = key->mode;
    } else {
      out.doc_id = doc.at("doc_id").get<std::string>();
      out.clause = parse_clause(doc.at("clause").get<std::string>());
      out.mode = parse_mode(doc.at("mode").get<std::string>());
    }
    auto number = [&doc](const char* name) -> std::optional<double> {
      auto it = doc.find(name);
      if (it == doc.end() || it->is_null()) return std::nullopt;
      if (!it->is_number()) throw Error(std::string("'") + name + "' must be a number");
      return it->get<double>();
    };
    out.auto_score = number("auto_score");
    out.manual_score = number("manual_score");
    if (!out.manual_score) out.manual_score = number("score");
    out.scorer = doc.value("scorer", std::string(kAutoScorer));
    out.timestamp = doc.value("timestamp", "");
    return out;
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid evaluation record: ") + e.what());
  }
}

double round_half_up_2(double value) { return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0; }

void ScoreStore::set_auto(const OutputKey& key, double score) {
  if (!std::isfinite(score) || score < 0.0 || score > 100.0) {
    throw Error(fmt::format("auto score {} for '{}' is outside [0, 100]", score, key.str()));
  }
  tasks_[key] = score;
}

void ScoreStore::validate_manual(const EvaluationRecord& record) {
  if (!record.manual_score) throw Error("record for '" + record.key().str() + "' has no manual score");
  const double score = *record.manual_score;
  if (!std::isfinite(score) || score < 0.0 || score > 100.0) {
    throw Error(fmt::format("score {} for '{}' is outside [0, 100]", score, record.key().str()));
  }
  if (record.scorer.empty()) throw Error("scorer must not be empty");
  if (record.scorer == kAutoScorer) throw Error("scorer name 'auto' is reserved");
}

void ScoreStore::ingest_manual(const std::vector<EvaluationRecord>& records) {
  std::set<std::pair<OutputKey, std::string>> seen;
  for (const EvaluationRecord& record : records) {
    validate_manual(record);
    if (!contains(record.key())) throw Error("unknown task '" + record.key().str() + "'");
    if (!seen.emplace(record.key(), record.scorer).second) {
      throw Error("duplicate score for '" + record.key().str() + "' by '" + record.scorer + "' in one submission");
    }
  }
  for (const EvaluationRecord& record : records) manual_[record.key()][record.scorer] = *record.manual_score;
}

std::optional<double> ScoreStore::auto_score(const OutputKey& key) const {
  auto it = tasks_.find(key);
  return it == tasks_.end() ? std::nullopt : it->second;
}

std::optional<double> ScoreStore::manual_score(const OutputKey& key) const {
  auto it = manual_.find(key);
  if (it == manual_.end() || it->second.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& [scorer, score] : it->second) total += score;
  return total / static_cast<double>(it->second.size());
}

std::optional<double> ScoreStore::effective(const OutputKey& key) const {
  if (auto manual = manual_score(key)) return manual;
  return auto_score(key);
}

ClauseAggregate ScoreStore::summarize(ClauseKind clause, Mode mode) const {
  ClauseAggregate out;
  double total = 0.0;
  for (const auto& [key, score] : tasks_) {
    if (key.clause != clause || key.mode != mode) continue;
    const auto value = effective(key);
    if (!value) continue;
    total += *value;
    ++out.records;
    if (is_scored(key)) ++out.manual;
  }
  if (out.records > 0) out.mean = round_half_up_2(total / static_cast<double>(out.records));
  return out;
}

double ScoreStore::aggregate(ClauseKind clause, Mode mode) const {
  const ClauseAggregate summary = summarize(clause, mode);
  if (!summary.mean) {
    throw Error(fmt::format("no records for {} ({})", clause_slug(clause), mode_slug(mode)));
  }
  return *summary.mean;
}

std::vector<OutputKey> ScoreStore::keys() const {
  std::vector<OutputKey> out;
  out.reserve(tasks_.size());
  for (const auto& entry : tasks_) out.push_back(entry.first);
  return out;
}

// ---------------------------------------------------------------------------

void ManualScoreLog::append(const std::vector<EvaluationRecord>& records) const {
  std::string text;
  for (const EvaluationRecord& record : records) text += record.to_json().dump() + "\n";
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open '" + path_.string() + "': " + std::strerror(errno));
  std::size_t written = 0;
  while (written < text.size()) {
    const ssize_t n = ::write(fd, text.data() + written, text.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error("cannot write '" + path_.string() + "': " + std::strerror(err));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error("cannot sync '" + path_.string() + "': " + std::strerror(err));
  }
  ::close(fd);
}

std::vector<EvaluationRecord> ManualScoreLog::load() const {
  std::vector<EvaluationRecord> out;
  if (!std::filesystem::exists(path_)) return out;
  const std::string text = read_text_file(path_);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const bool terminated = end != std::string::npos;
    const std::string line = text.substr(pos, terminated ? end - pos : std::string::npos);
    pos = terminated ? end + 1 : text.size();
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(EvaluationRecord::from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      // An unterminated final line is an interrupted append that was never acknowledged.
      if (!terminated) break;
      throw Error(fmt::format("{}:{}: {}", path_.string(), line_no, e.what()));
    }
  }
  return out;
}

std::vector<EvaluationRecord> load_manual_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    std::vector<EvaluationRecord> out;
    try {
      for (const Json& item : Json::parse(text)) out.push_back(EvaluationRecord::from_json(item));
    } catch (const Json::parse_error& e) {
      throw Error("malformed score file '" + path.string() + "': " + e.what());
    }
    return out;
  }
  return ManualScoreLog(path).load();
}

// ---------------------------------------------------------------------------

std::size_t clause_column(ClauseKind clause) {
  for (std::size_t i = 0; i < kAllClauses.size(); ++i) {
    if (kAllClauses[i] == clause) return i;
  }
  throw Error("unknown clause");
}

double ReferenceScoreTable::score(std::size_t row, ClauseKind clause) const {
  return rows.at(row).scores[clause_column(clause)];
}

namespace {

ReferenceRow parse_row(const Json& row) {
  ReferenceRow out;
  out.model = row.at("model").get<std::string>();
  out.params = row.at("params").get<std::string>();
  const Json& scores = row.at("scores");
  if (!scores.is_array() || scores.size() != 4) throw Error("reference row '" + out.model + "' needs 4 scores");
  for (std::size_t i = 0; i < 4; ++i) out.scores[i] = scores[i].get<double>();
  return out;
}

}  // namespace

std::vector<ReferenceScoreTable> reference_tables_from_json(const Json& doc) {
  try {
    const Json& columns = doc.at("columns");
    if (columns.size() != kAllClauses.size()) throw Error("reference tables need 4 columns");
    for (std::size_t i = 0; i < kAllClauses.size(); ++i) {
      if (parse_clause(columns[i].get<std::string>()) != kAllClauses[i]) {
        throw Error("reference table column " + std::to_string(i) + " is out of order");
      }
    }
    std::vector<ReferenceScoreTable> out;
    for (const Json& table : doc.at("tables")) {
      ReferenceScoreTable t;
      t.mode = parse_mode(table.at("mode").get<std::string>());
      t.title = table.value("title", "");
      for (const Json& row : table.at("rows")) t.rows.push_back(parse_row(row));
      if (auto it = table.find("published"); it != table.end()) {
        t.published = parse_row(*it);
        if (auto ranks = it->find("ranks"); ranks != it->end()) {
          std::array<int, 4> r{};
          for (std::size_t i = 0; i < 4; ++i) r[i] = ranks->at(i).get<int>();
          t.published_ranks = r;
        }
      }
      out.push_back(std::move(t));
    }
    return out;
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid reference score table: ") + e.what());
  }
}

const ReferenceScoreTable& reference_table(Mode mode) {
  static const std::vector<ReferenceScoreTable> tables =
      reference_tables_from_json(Json::parse(assets::reference_scores()));
  for (const ReferenceScoreTable& t : tables) {
    if (t.mode == mode) return t;
  }
  throw Error("no reference table for mode '" + std::string(mode_slug(mode)) + "'");
}

int rank_against_reference(double score, const ReferenceScoreTable& table, ClauseKind clause) {
  const std::size_t column = clause_column(clause);
  int rank = 1;
  for (const ReferenceRow& row : table.rows) {
    if (row.scores[column] > score) ++rank;
  }
  return rank;
}

std::string ordinal(int n) {
  const int tens = n % 100;
  const char* suffix = "th";
  if (tens < 11 || tens > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

// ---------------------------------------------------------------------------

BenchmarkReport emit_report(const ScoreStore& store, const Provenance& provenance,
                            const std::map<ClauseKind, std::size_t>& applicable) {
  BenchmarkReport report;
  report.provenance = provenance;
  for (Mode mode : kAllModes) {
    for (ClauseKind clause : kAllClauses) {
      const ClauseAggregate summary = store.summarize(clause, mode);
      ReportCell cell;
      cell.mean = summary.mean;
      cell.evaluated = summary.records;
      cell.manual = summary.manual;
      if (auto it = applicable.find(clause); it != applicable.end()) cell.applicable = it->second;
      if (cell.mean) cell.rank = rank_against_reference(*cell.mean, reference_table(mode), clause);
      report.cells[mode][clause] = cell;
    }
  }
  return report;
}

namespace {

std::string_view mode_title(Mode mode) { return mode == Mode::WithRag ? "With RAG" : "Without RAG"; }

std::string fixed2(double value) { return fmt::format("{:.2f}", value); }

}  // namespace

Json BenchmarkReport::to_json() const {
  Json out = Json::object();
  out["provenance"] = {{"run_id", provenance.run_id},
                       {"backend", provenance.backend},
                       {"config_digest", provenance.config_digest},
                       {"seeded_published_scores", provenance.seeded}};
  Json modes = Json::object();
  for (const auto& [mode, clauses] : cells) {
    Json entry = Json::object();
    for (const auto& [clause, cell] : clauses) {
      Json c = Json::object();
      c["mean"] = cell.mean ? Json(*cell.mean) : Json(nullptr);
      c["rank"] = cell.rank ? Json(*cell.rank) : Json(nullptr);
      c["evaluated"] = cell.evaluated;
      c["manual"] = cell.manual;
      c["applicable"] = cell.applicable;
      if (!cell.mean) c["status"] = "no data";
      entry[std::string(clause_slug(clause))] = std::move(c);
    }
    modes[std::string(mode_slug(mode))] = std::move(entry);
  }
  out["modes"] = std::move(modes);
  return out;
}

std::string BenchmarkReport::to_markdown() const {
  std::ostringstream md;
  md << "# CDMizer benchmark report\n\n";
  md << "- Run: " << (provenance.run_id.empty() ? "-" : provenance.run_id) << "\n";
  md << "- Backend: " << (provenance.backend.empty() ? "-" : provenance.backend) << "\n";
  md << "- Config digest: " << (provenance.config_digest.empty() ? "-" : provenance.config_digest) << "\n";
  if (provenance.seeded) md << "- Scores: published CDMizer scores, not run data\n";

  for (const auto& [mode, clauses] : cells) {
    const ReferenceScoreTable& table = reference_table(mode);
    md << "\n## " << mode_title(mode) << "\n\n| Model | Parameters |";
    for (ClauseKind clause : kAllClauses) md << ' ' << clause_display_name(clause) << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < kAllClauses.size(); ++i) md << "---:|";
    md << '\n';
    for (const ReferenceRow& row : table.rows) {
      md << "| " << row.model << " | " << row.params << " |";
      for (double s : row.scores) md << ' ' << fixed2(s) << " |";
      md << '\n';
    }
    md << "| **CDMizer (this run)** | " << (provenance.backend.empty() ? "-" : provenance.backend) << " |";
    for (ClauseKind clause : kAllClauses) {
      const ReportCell& cell = clauses.at(clause);
      md << ' ' << (cell.mean ? "**" + fixed2(*cell.mean) + "**" : std::string("no data")) << " |";
    }
    md << "\n| Rank (out of " << table.rows.size() + 1 << " models) | |";
    for (ClauseKind clause : kAllClauses) {
      const ReportCell& cell = clauses.at(clause);
      md << ' ' << (cell.rank ? ordinal(*cell.rank) : std::string("no data")) << " |";
    }
    md << "\n\nEvaluated outputs:";
    for (ClauseKind clause : kAllClauses) {
      const ReportCell& cell = clauses.at(clause);
      md << ' ' << clause_display_name(clause) << ' ' << cell.evaluated;
      if (cell.applicable > 0) md << '/' << cell.applicable;
      if (cell.manual > 0) md << " (" << cell.manual << " manual)";
      md << (clause == kAllClauses.back() ? "." : ";");
    }
    md << '\n';
  }
  return md.str();
}

ScoreStore seed_published_scores() {
  ScoreStore store;
  for (Mode mode : kAllModes) {
    const ReferenceScoreTable& table = reference_table(mode);
    if (!table.published) throw Error("reference table has no published scores");
    for (ClauseKind clause : kAllClauses) {
      store.set_auto({"published", clause, mode}, table.published->scores[clause_column(clause)]);
    }
  }
  return store;
}

ScoreStore build_score_store(const RunStore& run, const Corpus& corpus, const SchemaGraph& graph) {
  std::vector<OutputKey> keys;
  std::vector<GeneratedOutput> outputs;
  for (const OutputKey& key : run.list_outputs()) {
    const ContractDoc* doc = corpus.find(key.doc_id);
    if (!doc) throw CorpusError("run output '" + key.str() + "' names a document missing from the corpus");
    if (!doc->applicable(key.clause)) continue;
    outputs.push_back(GeneratedOutput::from_json(run.read_output(key)));
    keys.push_back(key);
  }

  std::vector<ScoreJob> jobs;
  jobs.reserve(outputs.size());
  for (const GeneratedOutput& out : outputs) {
    const ContractDoc& doc = corpus.at(out.doc_id);
    jobs.push_back({out.parsed ? &*out.parsed : nullptr, doc.truth(out.clause)});
  }
  const std::vector<AutoScore> scores = score_batch(jobs, graph);

  ScoreStore store;
  for (std::size_t i = 0; i < keys.size(); ++i) store.set_auto(keys[i], scores[i].score);
  for (const EvaluationRecord& record : ManualScoreLog(run.manual_scores_path()).load()) {
    store.ingest_manual({record});
  }
  return store;
}

}  // namespace cdmizer
