#include "cdmizer/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;

namespace cdmizer {

const Json* ContractDoc::truth(ClauseKind clause) const {
  auto it = ground_truth.find(clause);
  return it == ground_truth.end() ? nullptr : &it->second;
}

Corpus::Corpus(std::vector<ContractDoc> docs, Json manifest)
    : docs_(std::move(docs)), manifest_(std::move(manifest)) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!index_.emplace(docs_[i].id, i).second) {
      throw CorpusError("duplicate document id '" + docs_[i].id + "'");
    }
  }
}

const ContractDoc* Corpus::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &docs_[it->second];
}

const ContractDoc& Corpus::at(std::string_view id) const {
  const ContractDoc* doc = find(id);
  if (doc == nullptr) throw CorpusError("unknown document id '" + std::string(id) + "'");
  return *doc;
}

std::size_t Corpus::applicable_count(ClauseKind clause) const {
  return static_cast<std::size_t>(
      std::count_if(docs_.begin(), docs_.end(), [clause](const ContractDoc& d) { return d.applicable(clause); }));
}

bool CorpusView::contains(std::string_view id) const {
  return std::any_of(indices_.begin(), indices_.end(),
                     [&](std::size_t i) { return corpus_->docs()[i].id == id; });
}

bool is_valid_doc_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file_atomic(const fs::path& path, std::string_view text) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

Corpus load_corpus(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) {
    throw CorpusError("missing manifest: '" + manifest_path.string() + "' not found");
  }
  Json manifest;
  try {
    manifest = Json::parse(read_text_file(manifest_path));
  } catch (const Json::parse_error& e) {
    throw CorpusError("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  if (!manifest.is_object()) throw CorpusError("manifest must be a JSON object");

  std::vector<std::string> ids;
  if (auto it = manifest.find("docs"); it != manifest.end()) {
    if (!it->is_array()) throw CorpusError("manifest 'docs' must be a list of ids");
    for (const Json& id : *it) {
      if (!id.is_string()) throw CorpusError("manifest 'docs' must be a list of ids");
      ids.push_back(id.get<std::string>());
    }
  } else if (fs::is_directory(dir / "docs")) {
    for (const auto& entry : fs::directory_iterator(dir / "docs")) {
      if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
  }

  std::vector<ContractDoc> docs;
  docs.reserve(ids.size());
  for (const std::string& id : ids) {
    if (!is_valid_doc_id(id)) throw CorpusError("invalid document id '" + id + "'");
    const fs::path doc_dir = dir / "docs" / id;
    const fs::path text_path = doc_dir / "contract.txt";
    if (!fs::is_regular_file(text_path)) {
      throw CorpusError("document '" + id + "' has no contract.txt");
    }
    ContractDoc doc{id, read_text_file(text_path), {}};
    const fs::path truth_dir = doc_dir / "truth";
    if (fs::is_directory(truth_dir)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(truth_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& file : files) {
        ClauseKind clause;
        try {
          clause = parse_clause(file.stem().string());
        } catch (const Error&) {
          throw CorpusError("document '" + id + "': unknown clause file '" + file.filename().string() + "'");
        }
        try {
          doc.ground_truth[clause] = Json::parse(read_text_file(file));
        } catch (const Json::parse_error& e) {
          throw CorpusError("document '" + id + "', clause '" + std::string(clause_slug(clause)) +
                            "': unparsable ground truth: " + e.what());
        }
      }
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), std::move(manifest));
}

CorpusView leave_one_out(const Corpus& corpus, std::string_view excluded_id) {
  if (corpus.find(excluded_id) == nullptr) {
    throw CorpusError("unknown document id '" + std::string(excluded_id) + "'");
  }
  std::vector<std::size_t> indices;
  indices.reserve(corpus.size() - 1);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.docs()[i].id != excluded_id) indices.push_back(i);
  }
  return CorpusView(corpus, std::move(indices));
}

const std::vector<std::string>& clause_keywords(ClauseKind clause) {
  static const std::map<ClauseKind, std::vector<std::string>> keywords = {
      {ClauseKind::BaseAndEligibleCurrency, {"base currency", "eligible currency"}},
      {ClauseKind::Mta, {"minimum transfer amount"}},
      {ClauseKind::Threshold, {"threshold"}},
      {ClauseKind::Rounding, {"rounding", "rounded"}},
  };
  return keywords.at(clause);
}

std::string clause_excerpt(std::string_view text, ClauseKind clause) {
  std::string lowered(text);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  // Split on blank lines (a line holding only whitespace counts as blank).
  std::vector<std::pair<std::size_t, std::size_t>> paragraphs;
  std::size_t start = 0;
  std::size_t pos = 0;
  bool in_paragraph = false;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    const bool blank = line.find_first_not_of(" \t\r") == std::string_view::npos;
    if (!blank && !in_paragraph) {
      start = pos;
      in_paragraph = true;
    } else if (blank && in_paragraph) {
      paragraphs.emplace_back(start, pos);
      in_paragraph = false;
    }
    pos = eol + 1;
  }
  if (in_paragraph) paragraphs.emplace_back(start, text.size());

  std::string out;
  for (const auto& [begin, end] : paragraphs) {
    const std::string_view lowered_paragraph = std::string_view(lowered).substr(begin, end - begin);
    const bool hit = std::any_of(clause_keywords(clause).begin(), clause_keywords(clause).end(),
                                 [&](const std::string& k) { return lowered_paragraph.find(k) != std::string_view::npos; });
    if (!hit) continue;
    std::string_view paragraph = text.substr(begin, end - begin);
    while (!paragraph.empty() && (paragraph.back() == '\n' || paragraph.back() == '\r')) paragraph.remove_suffix(1);
    if (!out.empty()) out += "\n\n";
    out += paragraph;
  }
  return out.empty() ? std::string(text) : out;
}

// ---------------------------------------------------------------------------

std::string OutputKey::str() const {
  return doc_id + "." + std::string(clause_slug(clause)) + "." + std::string(mode_slug(mode));
}

std::optional<OutputKey> OutputKey::parse(std::string_view text) {
  const auto first = text.find('.');
  const auto last = text.rfind('.');
  if (first == std::string_view::npos || first == last) return std::nullopt;
  const std::string_view id = text.substr(0, first);
  if (!is_valid_doc_id(id)) return std::nullopt;
  try {
    return OutputKey{std::string(id), parse_clause(text.substr(first + 1, last - first - 1)),
                     parse_mode(text.substr(last + 1))};
  } catch (const Error&) {
    return std::nullopt;
  }
}

RunStore RunStore::create(const fs::path& run_dir) {
  fs::create_directories(run_dir / "outputs");
  return RunStore(run_dir);
}

RunStore RunStore::open(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir / "outputs")) {
    throw Error("no run directory at '" + run_dir.string() + "'");
  }
  return RunStore(run_dir);
}

fs::path RunStore::output_path(const OutputKey& key) const {
  return dir_ / "outputs" / (key.str() + ".json");
}

bool RunStore::has_output(const OutputKey& key) const {
  const fs::path path = output_path(key);
  if (!fs::is_regular_file(path)) return false;
  return Json::accept(read_text_file(path));
}

void RunStore::write_output(const OutputKey& key, const Json& output) const {
  write_text_file_atomic(output_path(key), output.dump(2) + "\n");
}

Json RunStore::read_output(const OutputKey& key) const {
  return Json::parse(read_text_file(output_path(key)));
}

std::vector<OutputKey> RunStore::list_outputs() const {
  std::vector<OutputKey> keys;
  for (const auto& entry : fs::directory_iterator(dir_ / "outputs")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    if (auto key = OutputKey::parse(entry.path().stem().string())) keys.push_back(std::move(*key));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void RunStore::write_config(const Json& config) const {
  write_text_file_atomic(dir_ / "config.json", config.dump(2) + "\n");
}

std::optional<Json> RunStore::read_config() const {
  const fs::path path = dir_ / "config.json";
  if (!fs::is_regular_file(path)) return std::nullopt;
  return Json::parse(read_text_file(path));
}

}  // namespace cdmizer
