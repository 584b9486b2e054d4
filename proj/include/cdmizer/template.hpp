#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdmizer/schema.hpp"
#include "cdmizer/types.hpp"

namespace cdmizer {

// The schema leaves a clause template must expose as placeholders.
struct TargetSet {
  ClauseKind clause = ClauseKind::Mta;
  std::vector<FieldPath> targets;
};

// Clause -> target paths. The compiled-in registry can be overridden per
// clause from a JSON file of the form {"mta": ["a/b[]/c", ...], ...}.
class TargetRegistry {
 public:
  static TargetRegistry builtin();
  static TargetRegistry from_json(const Json& doc);

  // Entries in `path` replace the corresponding builtin entries.
  static TargetRegistry with_overrides(const std::string& path);

  const TargetSet& at(ClauseKind clause) const;

 private:
  std::map<ClauseKind, TargetSet> sets_;
};

TargetSet builtin_targets(ClauseKind clause);

// A placeholder leaf is the string "<<FILL|<type>|<hint>>>" where type is the
// schema leaf kind and hint the owning field name.
std::string placeholder_token(NodeKind kind, std::string_view hint);

struct PlaceholderInfo {
  std::string type;
  std::string hint;
};

std::optional<PlaceholderInfo> parse_placeholder(const Json& value);
// True for any string that still carries the "<<FILL|" sentinel prefix.
bool looks_like_placeholder(const Json& value);

struct Template {
  ClauseKind clause = ClauseKind::Mta;
  Json skeleton;
  std::vector<FieldPath> placeholder_paths;  // document order
};

// Depth-first traversal from the root keeping target ancestor chains, target
// leaves, and schema-required fields of retained objects. Arrays get exactly
// one exemplar element. Throws PathError for unresolvable targets.
Template generate_template(const SchemaGraph& graph, const TargetSet& targets);

// Two-space indented, field order preserved, newline terminated.
std::string render(const Template& tmpl);

}  // namespace cdmizer
