#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdmizer/schema.hpp"
#include "cdmizer/template.hpp"
#include "cdmizer/types.hpp"

namespace cdmizer {

// `path` is a JSON Pointer into the validated value.
struct Violation {
  std::string path;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

Json violations_to_json(const std::vector<Violation>& violations);
std::vector<Violation> violations_from_json(const Json& doc);

struct ConformanceReport {
  bool schema_ok = true;
  bool template_ok = true;
  std::vector<Violation> violations;
  std::optional<Json> normalized;  // present iff both layers pass

  bool passed() const { return schema_ok && template_ok; }

  Json to_json() const;
  static ConformanceReport from_json(const Json& doc);
};

enum class ValidationMode {
  Full,      // kinds, enum membership, required fields
  Template,  // kinds and enums only; required checks waived
};

// Placeholder sentinels are kind-checked against their declared type in both
// modes; whether a sentinel may survive is decided by the template layer.
std::vector<Violation> validate_against_schema(const Json& value, const SchemaGraph& graph,
                                               ValidationMode mode);

// The value must be obtainable from the skeleton by filling every placeholder
// with a kind-correct value and repeating each array exemplar 0..n times.
std::vector<Violation> validate_against_template(const Json& value, const Template& tmpl);

struct NormalizeResult {
  Json value;
  std::vector<Violation> violations;
};

// Currencies trimmed and upper-cased, integral numbers stored as integers,
// enum spellings mapped case-insensitively to the schema's canonical form.
// Idempotent. Expects a schema-valid value; unmappable enum values are reported.
NormalizeResult normalize(const Json& value, const SchemaGraph& graph);

ConformanceReport check_conformance(const Json& value, const SchemaGraph& graph, const Template& tmpl);

}  // namespace cdmizer
