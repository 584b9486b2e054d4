#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "cdmizer/conformance.hpp"
#include "cdmizer/corpus_gen.hpp"
#include "cdmizer/template.hpp"
#include "support/tempdir.hpp"

using namespace cdmizer;

namespace {

const char* kToy = R"({"root":"R","definitions":{"R":{"kind":"object","children":{
  "a":{"kind":"object","children":{"x":{"kind":"string"},"y":{"kind":"string"}}},
  "b":{"kind":"number"}}}}})";

const char* kToyRequired = R"({"root":"R","definitions":{
  "R":{"kind":"object","children":{"a":{"kind":"reference","ref":"A"},"w":{"kind":"string"}}},
  "A":{"kind":"object","children":{
    "x":{"kind":"string"},"y":{"kind":"string"},"z":{"kind":"integer"},
    "n":{"kind":"reference","ref":"N"},"o":{"kind":"reference","ref":"N"},
    "list":{"kind":"array","item":{"kind":"reference","ref":"N"}}},
    "required":["z","n"]},
  "N":{"kind":"object","children":{"p":{"kind":"enum","values":["P","Q"]},"q":{"kind":"boolean"}},
    "required":["p"]}}})";

TargetSet targets(std::initializer_list<const char*> paths) {
  TargetSet t;
  for (const char* p : paths) t.targets.push_back(FieldPath::parse(p));
  return t;
}

void placeholder_leaves(const Json& v, const FieldPath& at, std::vector<FieldPath>& out) {
  if (v.is_object()) {
    for (const auto& [k, c] : v.items()) placeholder_leaves(c, at.child(k), out);
  } else if (v.is_array()) {
    for (const auto& c : v) placeholder_leaves(c, at.child(FieldPath::kElement), out);
  } else if (parse_placeholder(v)) {
    out.push_back(at);
  }
}

// Retention rule evaluated directly on the schema: a path is kept when it is
// on a target's ancestor chain, or it is a required field of a kept object.
bool retained(const SchemaGraph& g, const FieldPath& p, const TargetSet& t) {
  if (p.empty()) return true;
  for (const FieldPath& target : t.targets) {
    if (target.size() >= p.size() && target.prefix(p.size()) == p) return true;
  }
  const FieldPath parent = p.prefix(p.size() - 1);
  if (!retained(g, parent, t)) return false;
  const std::string& last = p.segments().back();
  if (last == FieldPath::kElement) return true;
  const SchemaNode& owner = parent.empty() ? g.deref(g.root_node()) : resolve(g, parent);
  return owner.is_required(last);
}

// Every retained schema leaf, and only those, carries a placeholder.
void check_retention(const SchemaGraph& g, const TargetSet& t) {
  const Template tmpl = generate_template(g, t);
  std::vector<FieldPath> got;
  placeholder_leaves(tmpl.skeleton, {}, got);
  std::vector<FieldPath> expected;
  for (const FieldPath& p : enumerate_leaf_paths(g)) {
    if (retained(g, p, t)) expected.push_back(p);
  }
  CHECK(got == expected);
  CHECK(tmpl.placeholder_paths == got);
}

void remove_leaf(Json& v, const FieldPath& path, std::size_t i = 0) {
  const std::string& seg = path.segments()[i];
  if (seg == FieldPath::kElement) {
    if (i + 1 == path.size()) {
      v.erase(0);
    } else {
      remove_leaf(v[0], path, i + 1);
    }
  } else if (i + 1 == path.size()) {
    v.erase(seg);
  } else {
    remove_leaf(v[seg], path, i + 1);
  }
}

// Dropping any placeholder either loses a target or violates a required rule.
void check_minimal(const SchemaGraph& g, const TargetSet& t) {
  const Template tmpl = generate_template(g, t);
  for (const FieldPath& leaf : tmpl.placeholder_paths) {
    Json pruned = tmpl.skeleton;
    remove_leaf(pruned, leaf);
    const bool was_target = std::find(t.targets.begin(), t.targets.end(), leaf) != t.targets.end();
    bool breaks_required = false;
    for (const Violation& v : validate_against_schema(pruned, g, ValidationMode::Full)) {
      if (v.rule == "missing required field") breaks_required = true;
    }
    CHECK_MESSAGE((was_target || breaks_required), leaf.str());
  }
}

Json shape(const Json& v) {
  if (v.is_object()) {
    Json out = Json::object();
    for (const auto& [k, c] : v.items()) out[k] = shape(c);
    return out;
  }
  if (v.is_array()) return Json::array({v.empty() ? Json(nullptr) : shape(v[0])});
  return "*";
}

}  // namespace

TEST_CASE("single target prunes siblings") {
  const SchemaGraph g = parse_schema(kToy);
  const Template t = generate_template(g, targets({"a/x"}));
  CHECK(t.skeleton == Json::parse(R"({"a":{"x":"<<FILL|string|x>>"}})"));
  CHECK(t.placeholder_paths == std::vector<FieldPath>{FieldPath::parse("a/x")});
}

TEST_CASE("required siblings are retained") {
  const SchemaGraph g = parse_schema(kToyRequired);
  const Template t = generate_template(g, targets({"a/x"}));
  CHECK(t.skeleton == Json::parse(R"({"a":{"x":"<<FILL|string|x>>","z":"<<FILL|integer|z>>",
                                    "n":{"p":"<<FILL|enum|p>>"}}})"));
}

TEST_CASE("retention rule holds for every target subset of the toy schemas") {
  for (const char* text : {kToy, kToyRequired}) {
    const SchemaGraph g = parse_schema(text);
    const auto leaves = enumerate_leaf_paths(g);
    const std::size_t n = leaves.size();
    REQUIRE(n <= 12);
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      TargetSet t;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) t.targets.push_back(leaves[i]);
      }
      check_retention(g, t);
      check_minimal(g, t);
    }
  }
}

TEST_CASE("fixture clause templates follow the retention rule and are minimal") {
  const SchemaGraph& g = fixture_schema();
  for (ClauseKind clause : kAllClauses) {
    check_retention(g, builtin_targets(clause));
    check_minimal(g, builtin_targets(clause));
  }
}

TEST_CASE("builtin targets") {
  const std::string e = "agreementTerms/agreement/creditSupportAgreementElections/";
  const TargetSet mta = builtin_targets(ClauseKind::Mta);
  for (const char* leaf : {"amount", "currency", "party"}) {
    const FieldPath p = FieldPath::parse(e + "minimumTransferAmount[]/mtaType/fixedAmount/" + leaf);
    CHECK(std::find(mta.targets.begin(), mta.targets.end(), p) != mta.targets.end());
  }
  const TargetSet cur = builtin_targets(ClauseKind::BaseAndEligibleCurrency);
  bool base = false, eligible = false;
  for (const FieldPath& p : cur.targets) {
    base = base || p.str().find("baseCurrency") != std::string::npos;
    eligible = eligible || p.str().find("eligibleCurrency") != std::string::npos;
  }
  CHECK(base);
  CHECK(eligible);

  std::set<std::vector<FieldPath>> distinct;
  for (ClauseKind clause : kAllClauses) {
    CHECK(builtin_targets(clause).clause == clause);
    distinct.insert(builtin_targets(clause).targets);
  }
  CHECK(distinct.size() == 4);
}

TEST_CASE("MTA template has the published MTA shape") {
  const Template t = generate_template(fixture_schema(), builtin_targets(ClauseKind::Mta));
  CHECK(shape(t.skeleton) == shape(mta_example_truth()));
  const Json& entry = t.skeleton["agreementTerms"]["agreement"]["creditSupportAgreementElections"]
                                ["minimumTransferAmount"];
  REQUIRE(entry.is_array());
  CHECK(entry.size() == 1);
}

TEST_CASE("render is deterministic, parseable and uses sentinels") {
  const SchemaGraph& g = fixture_schema();
  for (ClauseKind clause : kAllClauses) {
    const Template a = generate_template(g, builtin_targets(clause));
    const Template b = generate_template(g, builtin_targets(clause));
    CHECK(render(a) == render(b));
    CHECK(a.placeholder_paths == b.placeholder_paths);
    CHECK(render(a).back() == '\n');
    CHECK(Json::parse(render(a)) == a.skeleton);
  }
  const std::string mta = render(generate_template(g, builtin_targets(ClauseKind::Mta)));
  CHECK(mta.find("\"<<FILL|number|amount>>\"") != std::string::npos);
  CHECK(mta.find("\n  \"agreementTerms\"") != std::string::npos);
}

TEST_CASE("templates validate in template mode and cover their targets") {
  const SchemaGraph& g = fixture_schema();
  for (ClauseKind clause : kAllClauses) {
    const TargetSet ts = builtin_targets(clause);
    const Template t = generate_template(g, ts);
    CHECK(validate_against_schema(t.skeleton, g, ValidationMode::Template).empty());
    for (const FieldPath& target : ts.targets) {
      CHECK(std::find(t.placeholder_paths.begin(), t.placeholder_paths.end(), target) != t.placeholder_paths.end());
    }
  }
}

TEST_CASE("placeholder tokens") {
  CHECK(placeholder_token(NodeKind::Number, "amount") == "<<FILL|number|amount>>");
  const auto info = parse_placeholder(Json("<<FILL|enum|party>>"));
  REQUIRE(info);
  CHECK(info->type == "enum");
  CHECK(info->hint == "party");
  CHECK_FALSE(parse_placeholder(Json("USD")));
  CHECK_FALSE(parse_placeholder(Json(5)));
  CHECK(looks_like_placeholder(Json("<<FILL|whatever")));
}

TEST_CASE("invalid targets are rejected") {
  const SchemaGraph& g = fixture_schema();
  CHECK_THROWS_AS(generate_template(g, targets({"agreementTerms/nothing"})), PathError);
  CHECK_THROWS_AS(generate_template(g, targets({"agreementTerms/agreement"})), Error);
  CHECK_THROWS_AS(generate_template(g, TargetSet{}), Error);
}

TEST_CASE("required fields forming a cycle are reported") {
  const SchemaGraph g = parse_schema(R"({"root":"A","definitions":{
    "A":{"kind":"object","children":{"x":{"kind":"string"},"b":{"kind":"reference","ref":"B"}},"required":["b"]},
    "B":{"kind":"object","children":{"a":{"kind":"reference","ref":"A"}},"required":["a"]}}})");
  CHECK_THROWS_AS(generate_template(g, targets({"x"})), Error);
}

TEST_CASE("registry file overrides single clauses") {
  TempDir dir;
  {
    std::ofstream out(dir / "targets.json");
    out << R"({"mta": ["agreementTerms/agreement/creditSupportAgreementElections/minimumTransferAmount[]/mtaType/zeroAmount"]})";
  }
  const TargetRegistry reg = TargetRegistry::with_overrides((dir / "targets.json").string());
  CHECK(reg.at(ClauseKind::Mta).targets.size() == 1);
  CHECK(reg.at(ClauseKind::Rounding).targets == builtin_targets(ClauseKind::Rounding).targets);
  CHECK_THROWS_AS(TargetRegistry::with_overrides((dir / "missing.json").string()), Error);
  CHECK_THROWS_AS(TargetRegistry::from_json(Json::parse(R"({"mta": []})")), Error);
}
