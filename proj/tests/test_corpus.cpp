#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "cdmizer/corpus.hpp"
#include "cdmizer/corpus_gen.hpp"
#include "support/tempdir.hpp"

using namespace cdmizer;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("fixture corpus has 60 documents, 37 with a threshold") {
  const Corpus c = generate_fixture_corpus();
  CHECK(c.size() == 60);
  CHECK(c.applicable_count(ClauseKind::Threshold) == 37);
  CHECK(c.applicable_count(ClauseKind::Mta) == 60);
  CHECK(c.applicable_count(ClauseKind::Rounding) == 60);
  CHECK(c.applicable_count(ClauseKind::BaseAndEligibleCurrency) == 60);
  const ContractDoc& mta = c.at(kMtaFixtureId);
  const std::string_view clause = mta_example_clause_text();
  const std::size_t split = clause.find("\n\n") + 2;
  CHECK(mta.text.find(std::string(clause.substr(0, split))) != std::string::npos);
  CHECK(mta.text.find(std::string(clause.substr(split))) != std::string::npos);
  REQUIRE(mta.truth(ClauseKind::Mta) != nullptr);
  CHECK(*mta.truth(ClauseKind::Mta) == mta_example_truth());
  CHECK(generate_fixture_corpus() == c);
}

TEST_CASE("written corpus loads back identically and idempotently") {
  TempDir dir;
  const Corpus c = generate_fixture_corpus();
  write_corpus(c, dir.path(), true);
  const Corpus a = load_corpus(dir.path());
  const Corpus b = load_corpus(dir.path());
  CHECK(a.docs() == c.docs());
  CHECK(a == b);
  CHECK(fs::is_regular_file(dir / "mock" / "csa-001.mta.txt"));
}

TEST_CASE("missing manifest is reported") {
  TempDir dir;
  try {
    load_corpus(dir.path());
    FAIL("expected a corpus error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("missing manifest") != std::string::npos);
  }
}

TEST_CASE("malformed ground truth names the document and clause") {
  TempDir dir;
  write(dir / "manifest.json", "{}");
  write(dir / "docs" / "d1" / "contract.txt", "text");
  write(dir / "docs" / "d1" / "truth" / "mta.json", "{\"a\": ");
  try {
    load_corpus(dir.path());
    FAIL("expected a corpus error");
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("d1") != std::string::npos);
    CHECK(msg.find("mta") != std::string::npos);
  }
}

TEST_CASE("other corpus layout errors") {
  TempDir dir;
  write(dir / "manifest.json", R"({"docs": ["d1"]})");
  CHECK_THROWS_AS(load_corpus(dir.path()), CorpusError);
  write(dir / "docs" / "d1" / "contract.txt", "text");
  write(dir / "docs" / "d1" / "truth" / "collateral.json", "{}");
  CHECK_THROWS_AS(load_corpus(dir.path()), CorpusError);
  fs::remove(dir / "docs" / "d1" / "truth" / "collateral.json");
  CHECK(load_corpus(dir.path()).size() == 1);
  write(dir / "manifest.json", R"({"docs": ["../x"]})");
  CHECK_THROWS_AS(load_corpus(dir.path()), CorpusError);
  write(dir / "manifest.json", "[1]");
  CHECK_THROWS_AS(load_corpus(dir.path()), CorpusError);
}

TEST_CASE("duplicate ids are rejected") {
  std::vector<ContractDoc> docs{{"a", "x", {}}, {"a", "y", {}}};
  CHECK_THROWS_AS(Corpus(docs, Json::object()), CorpusError);
  TempDir dir;
  write(dir / "manifest.json", R"({"docs": ["d1", "d1"]})");
  write(dir / "docs" / "d1" / "contract.txt", "text");
  CHECK_THROWS_AS(load_corpus(dir.path()), CorpusError);
}

TEST_CASE("leave-one-out views") {
  const Corpus c = generate_fixture_corpus();
  for (const ContractDoc& doc : c.docs()) {
    const CorpusView v = leave_one_out(c, doc.id);
    CHECK(v.size() == 59);
    CHECK_FALSE(v.contains(doc.id));
    std::size_t n = 0;
    v.for_each([&](const ContractDoc& d) {
      CHECK(d.id != doc.id);
      ++n;
    });
    CHECK(n == 59);
  }
  CHECK_THROWS_AS(leave_one_out(c, "nope"), CorpusError);

  const Corpus single({{"only", "text", {}}}, Json::object());
  CHECK(leave_one_out(single, "only").empty());
}

TEST_CASE("clause excerpt keeps keyword paragraphs, else the whole text") {
  const std::string text = "Intro paragraph.\n\nThe Minimum Transfer Amount is USD 1.\n  \nOther terms.\nMore.\n";
  CHECK(clause_excerpt(text, ClauseKind::Mta) == "The Minimum Transfer Amount is USD 1.");
  CHECK(clause_excerpt(text, ClauseKind::Rounding) == text);
  const std::string two = "Threshold A.\n\nnothing\n\nTHRESHOLD B.";
  CHECK(clause_excerpt(two, ClauseKind::Threshold) == "Threshold A.\n\nTHRESHOLD B.");
}

TEST_CASE("output keys") {
  const OutputKey k{"csa-007", ClauseKind::BaseAndEligibleCurrency, Mode::WithoutRag};
  CHECK(k.str() == "csa-007.base_eligible_currency.without-rag");
  CHECK(OutputKey::parse(k.str()) == k);
  CHECK_FALSE(OutputKey::parse("csa-007.mta"));
  CHECK_FALSE(OutputKey::parse("csa-007.nope.with-rag"));
  CHECK_FALSE(OutputKey::parse("../x.mta.with-rag"));
  CHECK(is_valid_doc_id("csa-001"));
  CHECK_FALSE(is_valid_doc_id(""));
  CHECK_FALSE(is_valid_doc_id("a/b"));
}

TEST_CASE("run store writes atomically and lists outputs") {
  TempDir dir;
  CHECK_THROWS_AS(RunStore::open(dir / "run"), Error);
  const RunStore store = RunStore::create(dir / "run");
  CHECK(store.run_id() == "run");
  const OutputKey a{"d1", ClauseKind::Mta, Mode::WithRag};
  const OutputKey b{"d0", ClauseKind::Rounding, Mode::WithoutRag};
  CHECK_FALSE(store.has_output(a));
  store.write_output(a, Json{{"x", 1}});
  store.write_output(b, Json{{"y", 2}});
  CHECK(store.has_output(a));
  CHECK(store.read_output(a) == Json{{"x", 1}});
  CHECK(store.list_outputs() == std::vector<OutputKey>{b, a});

  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "run" / "outputs")) {
    CHECK(e.path().extension() == ".json");
    ++files;
  }
  CHECK(files == 2);

  write(store.output_path({"d2", ClauseKind::Mta, Mode::WithRag}), "{\"trunc");
  CHECK_FALSE(store.has_output({"d2", ClauseKind::Mta, Mode::WithRag}));

  CHECK_FALSE(store.read_config());
  store.write_config(Json{{"run_id", "run"}});
  CHECK(RunStore::open(dir / "run").read_config() == Json{{"run_id", "run"}});
}
