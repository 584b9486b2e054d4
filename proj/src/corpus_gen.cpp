#include "cdmizer/corpus_gen.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include <fmt/format.h>

namespace fs = std::filesystem;

namespace cdmizer {

namespace {

constexpr std::string_view kMtaClause =
    "Paragraph 12. Definitions\n"
    "“Minimum Transfer Amount” means, with respect to a party, the amount specified as such "
    "for that party in Paragraph 13; if no amount is specified, zero.\n"
    "\n"
    "Paragraph 13(vii) Minimum Transfer Amount\n"
    "\n"
    "(A) “Minimum Transfer Amount” means with respect to Party A: US Dollars 5,000,000. "
    "“Minimum Transfer Amount” means with respect to Party B: US Dollars 5,000,000.\n";

constexpr std::string_view kMtaCdm = R"("agreementTerms": {
    "agreement": {
      "creditSupportAgreementElections": {
        "minimumTransferAmount": [
          {
            "mtaType": {
              "fixedAmount": {
                "amount": 5000000,
                "currency": "USD",
                "party": "PARTY_1"
              }
            }
          },
          {
            "mtaType": {
              "fixedAmount": {
                "amount": 5000000,
                "currency": "USD",
                "party": "PARTY_2"
              }
            }
          }
        ]
      }
    }
})";

struct Currency {
  std::string_view code;
  std::string_view name;
};

constexpr Currency kCurrencies[] = {
    {"USD", "US Dollars"},    {"EUR", "Euro"},          {"GBP", "Pounds Sterling"},
    {"JPY", "Japanese Yen"},  {"CHF", "Swiss Francs"},  {"CAD", "Canadian Dollars"},
    {"AUD", "Australian Dollars"},
};

constexpr std::string_view kPartyNames[] = {
    "Northbridge Capital Markets LLC", "Aldgate Bank plc",          "Meridian Pension Trust",
    "Harbour Point Asset Management",   "Kestrel Insurance Company", "Lindqvist Bank AB",
    "Sakura Trust Bank, Ltd.",          "Cobalt Macro Fund LP",      "Rheinufer Landesbank",
    "Pacific Crest Securities Inc.",
};

constexpr std::int64_t kTransferAmounts[] = {0, 50000, 100000, 250000, 500000, 1000000, 5000000};
constexpr std::int64_t kThresholdAmounts[] = {0, 1000000, 5000000, 10000000, 25000000, 50000000};
constexpr std::int64_t kRoundingAmounts[] = {1000, 10000, 50000, 100000};

std::string with_commas(std::int64_t amount) {
  std::string digits = std::to_string(amount);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string money(const Currency& ccy, std::int64_t amount) {
  return amount == 0 ? std::string("zero") : fmt::format("{} {}", ccy.name, with_commas(amount));
}

std::string_view party_role(int index) { return index == 0 ? "PARTY_1" : "PARTY_2"; }

Json wrap_elections(Json elections) {
  return Json{{"agreementTerms", {{"agreement", {{"creditSupportAgreementElections", std::move(elections)}}}}}};
}

Json party_amounts(std::string_view entry_field, std::string_view type_field, const Currency& ccy,
                   const std::int64_t (&amounts)[2]) {
  Json entries = Json::array();
  for (int p = 0; p < 2; ++p) {
    entries.push_back({{std::string(type_field),
                        {{"fixedAmount", {{"amount", amounts[p]}, {"currency", ccy.code}, {"party", party_role(p)}}}}}});
  }
  return wrap_elections(Json{{std::string(entry_field), std::move(entries)}});
}

struct DocPlan {
  std::string id;
  std::string party_a;
  std::string party_b;
  int day = 1;
  int month = 1;
  int year = 2020;
  Currency base;
  std::vector<Currency> eligible;
  std::int64_t mta[2] = {0, 0};
  bool has_threshold = false;
  std::int64_t threshold[2] = {0, 0};
  std::int64_t rounding_amount = 0;
  std::string_view delivery_direction = "UP";
  std::string_view return_direction = "DOWN";
  bool verbatim_mta = false;
};

std::string direction_words(std::string_view direction) {
  if (direction == "UP") return "rounded up";
  if (direction == "DOWN") return "rounded down";
  return "rounded to the nearest";
}

std::string contract_text(const DocPlan& plan) {
  static constexpr std::string_view kMonths[] = {"January", "February", "March",     "April",   "May",      "June",
                                                 "July",    "August",   "September", "October", "November", "December"};
  std::string eligible_names;
  for (std::size_t i = 0; i < plan.eligible.size(); ++i) {
    if (i > 0) eligible_names += (i + 1 == plan.eligible.size()) ? " and " : ", ";
    eligible_names += plan.eligible[i].name;
  }

  std::string text;
  text += "CREDIT SUPPORT ANNEX\n";
  text += fmt::format("to the Schedule to the ISDA Master Agreement dated as of {} {} {}\n", kMonths[plan.month - 1],
                      plan.day, plan.year);
  text += fmt::format("between {} (“Party A”) and {} (“Party B”)\n\n", plan.party_a, plan.party_b);
  text += "This Annex supplements, forms part of, and is subject to the above-referenced Agreement.\n\n";

  if (plan.verbatim_mta) {
    text += std::string(kMtaClause.substr(0, kMtaClause.find("\n\n") + 2));
  } else {
    text += "Paragraph 12. Definitions\n";
    text += "“Minimum Transfer Amount” means, with respect to a party, the amount specified as such for "
            "that party in Paragraph 13; if no amount is specified, zero.\n\n";
  }
  text += fmt::format("“Base Currency” means {}.\n\n", plan.base.name);
  text += "“Eligible Currency” means the Base Currency and each other currency specified as such in "
          "Paragraph 13.\n\n";
  text += "“Valuation Date” means each Local Business Day on which the Valuation Agent determines the "
          "Exposure.\n\n";

  text += "Paragraph 13. Elections and Variables\n\n";
  text += "Paragraph 13(i) Base Currency and Eligible Currency\n";
  text += fmt::format("The Base Currency is {}. The following are Eligible Currencies: {}.\n\n", plan.base.name,
                      eligible_names);

  if (plan.has_threshold) {
    text += "Paragraph 13(vi) Threshold\n";
    text += fmt::format("“Threshold” means with respect to Party A: {}. “Threshold” means with "
                        "respect to Party B: {}.\n\n",
                        money(plan.base, plan.threshold[0]), money(plan.base, plan.threshold[1]));
  }

  if (plan.verbatim_mta) {
    text += std::string(kMtaClause.substr(kMtaClause.find("\n\n") + 2));
    text += "\n";
  } else {
    text += "Paragraph 13(vii) Minimum Transfer Amount\n\n";
    text += fmt::format("(A) “Minimum Transfer Amount” means with respect to Party A: {}. “Minimum "
                        "Transfer Amount” means with respect to Party B: {}.\n\n",
                        money(plan.base, plan.mta[0]), money(plan.base, plan.mta[1]));
  }

  text += "Paragraph 13(viii) Rounding\n";
  text += fmt::format("The Delivery Amount will be {} and the Return Amount will be {}, in each case to the "
                      "integral multiple of {}.\n\n",
                      direction_words(plan.delivery_direction), direction_words(plan.return_direction),
                      money(plan.base, plan.rounding_amount));

  text += "Paragraph 13(ix) Valuation Agent\n";
  text += "The Valuation Agent for all purposes is the party making the demand under Paragraph 3.\n\n";
  text += "Paragraph 13(x) Notification Time\n";
  text += "Notification Time means 1:00 p.m., New York time, on a Local Business Day.\n";
  return text;
}

std::map<ClauseKind, Json> ground_truth(const DocPlan& plan) {
  std::map<ClauseKind, Json> truth;

  Json eligible = Json::array();
  for (const Currency& ccy : plan.eligible) eligible.push_back(ccy.code);
  truth[ClauseKind::BaseAndEligibleCurrency] = wrap_elections(
      Json{{"baseAndEligibleCurrency", {{"baseCurrency", plan.base.code}, {"eligibleCurrency", std::move(eligible)}}}});

  truth[ClauseKind::Mta] = plan.verbatim_mta ? mta_example_truth()
                                             : party_amounts("minimumTransferAmount", "mtaType", plan.base, plan.mta);
  if (plan.has_threshold) {
    truth[ClauseKind::Threshold] = party_amounts("threshold", "thresholdType", plan.base, plan.threshold);
  }
  truth[ClauseKind::Rounding] = wrap_elections(
      Json{{"rounding",
            {{"deliveryAmount", {{"amount", plan.rounding_amount}, {"direction", plan.delivery_direction}}},
             {"returnAmount", {{"amount", plan.rounding_amount}, {"direction", plan.return_direction}}}}}});
  return truth;
}

}  // namespace

std::string_view mta_example_clause_text() { return kMtaClause; }

std::string_view mta_example_cdm_text() { return kMtaCdm; }

Json mta_example_truth() { return Json::parse("{" + std::string(kMtaCdm) + "}"); }

Corpus generate_fixture_corpus(const CorpusGenOptions& options) {
  if (options.docs == 0) throw Error("fixture corpus needs at least one document");
  if (options.threshold_docs > options.docs) throw Error("threshold_docs exceeds docs");

  // mt19937 output is fully specified; distributions are not, so draws use modulo.
  std::mt19937 rng(options.seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::size_t> order(options.docs);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick(i)]);
  std::vector<bool> threshold_applies(options.docs, false);
  for (std::size_t i = 0; i < options.threshold_docs; ++i) threshold_applies[order[i]] = true;

  constexpr std::size_t kPartyCount = std::size(kPartyNames);
  constexpr std::size_t kCurrencyCount = std::size(kCurrencies);

  std::vector<ContractDoc> docs;
  Json ids = Json::array();
  for (std::size_t i = 0; i < options.docs; ++i) {
    DocPlan plan;
    plan.id = fmt::format("csa-{:03}", i + 1);
    plan.verbatim_mta = (plan.id == kMtaFixtureId);
    const std::size_t a = pick(kPartyCount);
    plan.party_a = kPartyNames[a];
    plan.party_b = kPartyNames[(a + 1 + pick(kPartyCount - 1)) % kPartyCount];
    plan.day = 1 + static_cast<int>(pick(28));
    plan.month = 1 + static_cast<int>(pick(12));
    plan.year = 2005 + static_cast<int>(pick(19));
    plan.base = plan.verbatim_mta ? kCurrencies[0] : kCurrencies[pick(kCurrencyCount)];
    plan.eligible.push_back(plan.base);
    const std::size_t extra = pick(3);
    for (std::size_t e = 0; e < extra; ++e) {
      const Currency& ccy = kCurrencies[pick(kCurrencyCount)];
      const bool seen = std::any_of(plan.eligible.begin(), plan.eligible.end(),
                                    [&](const Currency& c) { return c.code == ccy.code; });
      if (!seen) plan.eligible.push_back(ccy);
    }
    if (plan.verbatim_mta) {
      plan.mta[0] = plan.mta[1] = 5000000;
    } else {
      plan.mta[0] = kTransferAmounts[pick(std::size(kTransferAmounts))];
      plan.mta[1] = pick(2) == 0 ? plan.mta[0] : kTransferAmounts[pick(std::size(kTransferAmounts))];
    }
    plan.has_threshold = threshold_applies[i];
    plan.threshold[0] = kThresholdAmounts[pick(std::size(kThresholdAmounts))];
    plan.threshold[1] = kThresholdAmounts[pick(std::size(kThresholdAmounts))];
    plan.rounding_amount = kRoundingAmounts[pick(std::size(kRoundingAmounts))];
    switch (pick(4)) {
      case 0:
        plan.delivery_direction = "NEAREST";
        plan.return_direction = "NEAREST";
        break;
      default:
        plan.delivery_direction = "UP";
        plan.return_direction = "DOWN";
        break;
    }

    ids.push_back(plan.id);
    docs.push_back(ContractDoc{plan.id, contract_text(plan), ground_truth(plan)});
  }

  Json applicability = Json::object();
  for (ClauseKind clause : kAllClauses) {
    applicability[std::string(clause_slug(clause))] = std::count_if(
        docs.begin(), docs.end(), [clause](const ContractDoc& d) { return d.applicable(clause); });
  }
  Json manifest = {
      {"name", "synthetic-csa-fixture"},
      {"version", 1},
      {"source", "synthetic; generated by cdmizer corpus-gen"},
      {"seed", options.seed},
      {"applicability", std::move(applicability)},
      {"docs", std::move(ids)},
  };
  return Corpus(std::move(docs), std::move(manifest));
}

void write_corpus(const Corpus& corpus, const fs::path& dir, bool mock_responses) {
  fs::create_directories(dir / "docs");
  for (const ContractDoc& doc : corpus.docs()) {
    const fs::path truth_dir = dir / "docs" / doc.id / "truth";
    fs::create_directories(truth_dir);
    write_text_file_atomic(dir / "docs" / doc.id / "contract.txt", doc.text);
    for (const auto& [clause, truth] : doc.ground_truth) {
      write_text_file_atomic(truth_dir / (std::string(clause_slug(clause)) + ".json"), truth.dump(2) + "\n");
    }
  }
  if (mock_responses) {
    fs::create_directories(dir / "mock");
    for (const ContractDoc& doc : corpus.docs()) {
      for (const auto& [clause, truth] : doc.ground_truth) {
        write_text_file_atomic(dir / "mock" / (doc.id + "." + std::string(clause_slug(clause)) + ".txt"),
                               "```json\n" + truth.dump(2) + "\n```\n");
      }
    }
  }
  write_text_file_atomic(dir / "manifest.json", corpus.manifest().dump(2) + "\n");
}

}  // namespace cdmizer
