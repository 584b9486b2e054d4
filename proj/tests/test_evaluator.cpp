#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "cdmizer/corpus_gen.hpp"
#include "cdmizer/evaluator.hpp"
#include "cdmizer/pipeline.hpp"
#include "support/oracle.hpp"
#include "support/tempdir.hpp"

using namespace cdmizer;

namespace {

const SchemaGraph& graph() { return fixture_schema(); }

Json& mta_entries(Json& v) {
  return v["agreementTerms"]["agreement"]["creditSupportAgreementElections"]["minimumTransferAmount"];
}

EvaluationRecord manual(const OutputKey& k, double score, std::string scorer = "alice") {
  EvaluationRecord r;
  r.doc_id = k.doc_id;
  r.clause = k.clause;
  r.mode = k.mode;
  r.manual_score = score;
  r.scorer = std::move(scorer);
  return r;
}

const OutputKey kA{"d1", ClauseKind::Mta, Mode::WithRag};
const OutputKey kB{"d2", ClauseKind::Mta, Mode::WithRag};

}  // namespace

TEST_CASE("auto score basics") {
  const Json truth = mta_example_truth();
  CHECK(count_leaves(truth) == 6);
  const AutoScore same = auto_score(truth, truth, graph());
  CHECK(same.score == 100.0);
  CHECK(same.matched == 6);
  CHECK(same.extraneous() == 0);

  CHECK(auto_score(Json::object(), truth, graph()).score == 0.0);

  Json one = truth;
  mta_entries(one)[1]["mtaType"]["fixedAmount"]["amount"] = 4000000;
  const AutoScore changed = auto_score(one, truth, graph());
  CHECK(changed.matched == 5);
  CHECK(changed.score == doctest::Approx(500.0 / 6.0));
  CHECK(round_half_up_2(changed.score) == doctest::Approx(83.33));

  CHECK(auto_score(truth, Json::object(), graph()).score == 100.0);
}

TEST_CASE("array order does not matter") {
  const Json truth = mta_example_truth();
  Json swapped = truth;
  std::swap(mta_entries(swapped)[0], mta_entries(swapped)[1]);
  CHECK(auto_score(swapped, truth, graph()).score == 100.0);

  Json extra = truth;
  mta_entries(extra).push_back(mta_entries(extra)[0]);
  const AutoScore s = auto_score(extra, truth, graph());
  CHECK(s.score == 100.0);
  CHECK(s.extraneous() == 3);
}

TEST_CASE("equivalent spellings score as equal, invalid values do not") {
  const Json truth = mta_example_truth();
  Json spelled = truth;
  mta_entries(spelled)[0]["mtaType"]["fixedAmount"]["currency"] = "usd";
  mta_entries(spelled)[0]["mtaType"]["fixedAmount"]["amount"] = 5000000.0;
  mta_entries(spelled)[1]["mtaType"]["fixedAmount"]["party"] = "party_2";
  CHECK(auto_score(spelled, truth, graph()).score == 100.0);

  Json bad = truth;
  mta_entries(bad)[0]["mtaType"]["fixedAmount"]["party"] = "Party A";
  const AutoScore s = auto_score(bad, truth, graph());
  CHECK(s.score == 0.0);
  CHECK_FALSE(s.diagnostic.empty());
}

TEST_CASE("auto scores agree with the brute-force oracle on random mutations") {
  const Corpus corpus = generate_fixture_corpus();
  std::mt19937 rng(7);
  const std::vector<Json> replacements = {Json("EUR"), Json(1), Json(250000), Json("PARTY_1"), Json("UP"), Json(nullptr)};
  std::size_t checked = 0;
  for (const ContractDoc& doc : corpus.docs()) {
    for (const auto& [clause, truth] : doc.ground_truth) {
      Json g = truth;
      std::vector<Json::json_pointer> leaves;
      std::function<void(const Json&, const Json::json_pointer&)> walk = [&](const Json& v, const Json::json_pointer& p) {
        if (v.is_object()) {
          for (const auto& [k, c] : v.items()) walk(c, p / k);
        } else if (v.is_array()) {
          for (std::size_t i = 0; i < v.size(); ++i) walk(v[i], p / i);
        } else {
          leaves.push_back(p);
        }
      };
      walk(g, {});
      for (int m = 0; m < 2 && !leaves.empty(); ++m) {
        const auto& ptr = leaves[rng() % leaves.size()];
        if (rng() % 3 == 0) {
          Json& parent = g[ptr.parent_pointer()];
          if (parent.is_array()) {
            parent.erase(static_cast<std::size_t>(std::stoul(ptr.back())));
          } else {
            parent.erase(ptr.back());
          }
          leaves.clear();
          walk(g, {});
        } else {
          Json r = replacements[rng() % replacements.size()];
          if (g[ptr].is_string() && r.is_string() && r == g[ptr]) continue;
          g[ptr] = r;
        }
      }
      const AutoScore s = auto_score(g, truth, graph());
      if (!s.diagnostic.empty()) continue;  // a replacement made the value unnormalizable
      CHECK(s.matched == oracle::matched(g, truth));
      CHECK(s.score == doctest::Approx(oracle::score(g, truth)));
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("batch kernels agree") {
  const Corpus corpus = generate_fixture_corpus();
  std::vector<Json> gens;
  std::vector<const Json*> truths;
  for (const ContractDoc& doc : corpus.docs()) {
    for (const auto& [clause, truth] : doc.ground_truth) {
      Json g = truth;
      if (gens.size() % 3 == 0) g = mta_example_truth();
      gens.push_back(std::move(g));
      truths.push_back(&truth);
    }
  }
  std::vector<ScoreJob> jobs;
  for (std::size_t i = 0; i < gens.size(); ++i) jobs.push_back({&gens[i], truths[i]});
  jobs.push_back({nullptr, truths[0]});
  const auto a = score_batch(jobs, graph());
  const auto b = score_batch_serial(jobs, graph());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].matched == b[i].matched);
  }
  CHECK(a.back().score == 0.0);
  CHECK(a.back().diagnostic == "no parsed output");
  CHECK_THROWS_AS(score_batch({{&gens[0], nullptr}}, graph()), Error);
}

TEST_CASE("manual scores take precedence and are overwritten per scorer") {
  ScoreStore store;
  store.set_auto(kA, 60.0);
  store.set_auto(kB, 80.0);
  CHECK(store.effective(kA) == 60.0);
  CHECK_FALSE(store.is_scored(kA));

  store.ingest_manual({manual(kA, 85)});
  CHECK(store.effective(kA) == 85.0);
  CHECK(store.auto_score(kA) == 60.0);
  CHECK(store.is_scored(kA));
  store.ingest_manual({manual(kA, 90)});
  CHECK(store.manual_score(kA) == 90.0);
  store.ingest_manual({manual(kA, 70, "bob")});
  CHECK(store.manual_score(kA) == 80.0);

  const ClauseAggregate agg = store.summarize(ClauseKind::Mta, Mode::WithRag);
  CHECK(agg.records == 2);
  CHECK(agg.manual == 1);
  CHECK(agg.mean == 80.0);
}

TEST_CASE("invalid manual batches change nothing") {
  ScoreStore store;
  store.set_auto(kA, 60.0);
  store.set_auto(kB, 80.0);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual(kA, 101)}), Error);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual(kA, -1)}), Error);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual({"zz", ClauseKind::Mta, Mode::WithRag}, 50)}), Error);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual(kA, 50, "")}), Error);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual(kA, 50, "auto")}), Error);
  CHECK_THROWS_AS(store.ingest_manual({manual(kB, 95), manual(kB, 50)}), Error);
  EvaluationRecord none = manual(kA, 1);
  none.manual_score.reset();
  CHECK_THROWS_AS(store.ingest_manual({none}), Error);
  CHECK_FALSE(store.is_scored(kB));
  CHECK(store.effective(kB) == 80.0);
  CHECK_THROWS_AS(store.set_auto(kA, 120.0), Error);
}

TEST_CASE("aggregates round half up to two decimals") {
  ScoreStore store;
  store.set_auto(kA, 80.0);
  store.set_auto(kB, 90.0);
  CHECK(store.aggregate(ClauseKind::Mta, Mode::WithRag) == 85.00);
  CHECK_THROWS_AS(store.aggregate(ClauseKind::Mta, Mode::WithoutRag), Error);
  CHECK_FALSE(store.summarize(ClauseKind::Rounding, Mode::WithRag).mean);

  ScoreStore full;
  for (int i = 0; i < 10; ++i) full.set_auto({"d" + std::to_string(i), ClauseKind::Rounding, Mode::WithRag}, 100.0);
  CHECK(full.aggregate(ClauseKind::Rounding, Mode::WithRag) == 100.00);

  CHECK(round_half_up_2(88.235) == doctest::Approx(88.24));
  CHECK(round_half_up_2(79.145) == doctest::Approx(79.15));
  CHECK(round_half_up_2(58.3149) == doctest::Approx(58.31));

  ScoreStore thirds;
  thirds.set_auto(kA, 100.0);
  thirds.set_auto(kB, 100.0);
  thirds.set_auto({"d3", ClauseKind::Mta, Mode::WithRag}, 500.0 / 6.0);
  CHECK(thirds.aggregate(ClauseKind::Mta, Mode::WithRag) == doctest::Approx(94.44));
}

TEST_CASE("reference ranks") {
  const auto& with = reference_table(Mode::WithRag);
  const auto& without = reference_table(Mode::WithoutRag);
  CHECK(with.rows.size() == 8);
  CHECK(rank_against_reference(58.31, without, ClauseKind::Mta) == 1);
  CHECK(rank_against_reference(88.24, with, ClauseKind::Threshold) == 6);
  CHECK(rank_against_reference(100.0, with, ClauseKind::Rounding) == 1);
  CHECK(rank_against_reference(0.0, with, ClauseKind::Rounding) == 9);
  CHECK(rank_against_reference(98.0, with, ClauseKind::Rounding) == 4);

  for (const ReferenceScoreTable* t : {&with, &without}) {
    REQUIRE(t->published);
    REQUIRE(t->published_ranks);
    for (ClauseKind clause : kAllClauses) {
      const std::size_t c = clause_column(clause);
      int expected = 1;
      for (const ReferenceRow& row : t->rows) expected += row.scores[c] > t->published->scores[c] ? 1 : 0;
      CHECK(rank_against_reference(t->published->scores[c], *t, clause) == expected);
      CHECK((*t->published_ranks)[c] == expected);
    }
  }
  CHECK(ordinal(1) == "1st");
  CHECK(ordinal(2) == "2nd");
  CHECK(ordinal(3) == "3rd");
  CHECK(ordinal(9) == "9th");
  CHECK(ordinal(11) == "11th");
  CHECK(ordinal(22) == "22nd");
}

TEST_CASE("reference table validation") {
  const Json good = Json::parse(R"({"columns":["base_eligible_currency","mta","threshold","rounding"],
    "tables":[{"mode":"with-rag","title":"t","rows":[{"model":"m","params":"p","scores":[1,2,3,4]}]}]})");
  CHECK(reference_tables_from_json(good).size() == 1);
  Json swapped = good;
  swapped["columns"] = Json::array({"mta", "base_eligible_currency", "threshold", "rounding"});
  CHECK_THROWS_AS(reference_tables_from_json(swapped), Error);
  Json short_row = good;
  short_row["tables"][0]["rows"][0]["scores"] = Json::array({1, 2});
  CHECK_THROWS_AS(reference_tables_from_json(short_row), Error);
}

TEST_CASE("report from an empty store has no data") {
  const BenchmarkReport r = emit_report(ScoreStore{}, Provenance{"run-x", "mock", "abc", false});
  const Json j = r.to_json();
  CHECK(j["modes"]["with-rag"]["mta"]["status"] == "no data");
  CHECK(j["modes"]["with-rag"]["mta"]["mean"].is_null());
  CHECK(j["modes"]["without-rag"]["rounding"]["rank"].is_null());
  const std::string md = r.to_markdown();
  CHECK(md.find("no data") != std::string::npos);
  CHECK(md.find("run-x") != std::string::npos);
}

TEST_CASE("seeded report reproduces the published rank rows") {
  const BenchmarkReport r = emit_report(seed_published_scores(), Provenance{"", "", "", true});
  const std::array<int, 4> with{7, 7, 6, 9};
  const std::array<int, 4> without{7, 1, 7, 9};
  for (ClauseKind clause : kAllClauses) {
    CHECK(r.cells.at(Mode::WithRag).at(clause).rank == with[clause_column(clause)]);
    CHECK(r.cells.at(Mode::WithoutRag).at(clause).rank == without[clause_column(clause)]);
  }
  CHECK(r.cells.at(Mode::WithoutRag).at(ClauseKind::Mta).mean == 58.31);
  const std::string md = r.to_markdown();
  CHECK(md.find("| Rank (out of 9 models) | | 7th | 7th | 6th | 9th |") != std::string::npos);
  CHECK(md.find("| Rank (out of 9 models) | | 7th | 1st | 7th | 9th |") != std::string::npos);
  CHECK(md.find("**88.24**") != std::string::npos);
  CHECK(md.find("| Llama 3.3 | 70B |") != std::string::npos);
  CHECK(md.find("| Llama 3.3 70B | 70B |") != std::string::npos);
  CHECK(r.to_json()["provenance"]["seeded_published_scores"] == true);
}

TEST_CASE("evaluation records serialize") {
  EvaluationRecord r = manual(kA, 72.5, "carol");
  r.timestamp = "2026-01-01T00:00:00Z";
  const EvaluationRecord back = EvaluationRecord::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  const EvaluationRecord alt =
      EvaluationRecord::from_json(Json::parse(R"({"task_id":"d1.mta.with-rag","score":40,"scorer":"x"})"));
  CHECK(alt.key() == kA);
  CHECK(alt.manual_score == 40.0);
  CHECK_THROWS_AS(EvaluationRecord::from_json(Json::parse(R"({"task_id":"nope","score":1})")), Error);
  CHECK_THROWS_AS(EvaluationRecord::from_json(Json::parse(R"({"task_id":"d1.mta.with-rag","score":"1"})")), Error);
}

TEST_CASE("manual score log appends and replays") {
  TempDir dir;
  const ManualScoreLog log(dir / "manual_scores.jsonl");
  CHECK(log.load().empty());
  log.append({manual(kA, 85)});
  log.append({manual(kA, 90), manual(kB, 40, "bob")});
  auto records = log.load();
  REQUIRE(records.size() == 3);
  CHECK(records[2].scorer == "bob");

  ScoreStore store;
  store.set_auto(kA, 10);
  store.set_auto(kB, 10);
  for (const auto& r : records) store.ingest_manual({r});
  CHECK(store.effective(kA) == 90.0);

  {
    std::ofstream out(log.path(), std::ios::app);
    out << "{\"task_id\":\"d1.mta.wi";
  }
  CHECK(log.load().size() == 3);
  {
    std::ofstream out(log.path(), std::ios::app);
    out << "\n" << manual(kB, 1).to_json().dump() << "\n";
  }
  CHECK_THROWS_AS(log.load(), Error);
}

TEST_CASE("manual score files may be arrays or JSON lines") {
  TempDir dir;
  write_text_file_atomic(dir / "a.json", Json::array({manual(kA, 1).to_json(), manual(kB, 2).to_json()}).dump());
  write_text_file_atomic(dir / "b.jsonl", manual(kA, 1).to_json().dump() + "\n\n" + manual(kB, 2).to_json().dump());
  CHECK(load_manual_file(dir / "a.json").size() == 2);
  CHECK(load_manual_file(dir / "b.jsonl").size() == 2);
  write_text_file_atomic(dir / "c.json", "[1,");
  CHECK_THROWS_AS(load_manual_file(dir / "c.json"), Error);
}

TEST_CASE("score store from a run directory") {
  TempDir dir;
  const Corpus corpus = generate_fixture_corpus();
  const RunStore run = RunStore::create(dir / "run");
  GeneratedOutput good;
  good.doc_id = std::string(kMtaFixtureId);
  good.clause = ClauseKind::Mta;
  good.mode = Mode::WithoutRag;
  good.parsed = mta_example_truth();
  run.write_output(good.key(), good.to_json());
  GeneratedOutput empty = good;
  empty.mode = Mode::WithRag;
  empty.parsed.reset();
  run.write_output(empty.key(), empty.to_json());
  ManualScoreLog(run.manual_scores_path()).append({manual(empty.key(), 55)});

  const ScoreStore store = build_score_store(run, corpus, graph());
  CHECK(store.size() == 2);
  CHECK(store.effective(good.key()) == 100.0);
  CHECK(store.auto_score(empty.key()) == 0.0);
  CHECK(store.effective(empty.key()) == 55.0);

  GeneratedOutput stray = good;
  stray.doc_id = "ghost";
  run.write_output(stray.key(), stray.to_json());
  CHECK_THROWS_AS(build_score_store(run, corpus, graph()), CorpusError);
}
