#include "cdmizer/conformance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace cdmizer {

namespace {

std::string pointer_child(const std::string& base, std::string_view key) {
  std::string out = base + "/";
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::string pointer_index(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

std::string display(const std::string& pointer) { return pointer.empty() ? "/" : pointer; }

std::string json_type_name(const Json& value) {
  if (value.is_number_integer()) return "integer";
  if (value.is_number_float()) return "number";
  return value.type_name();
}

bool is_integral(const Json& value) {
  if (value.is_number_integer()) return true;
  if (!value.is_number_float()) return false;
  const double d = value.get<double>();
  return std::isfinite(d) && std::floor(d) == d;
}

bool matches_leaf_type(const Json& value, std::string_view type) {
  if (type == "string" || type == "enum") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return is_integral(value);
  if (type == "boolean") return value.is_boolean();
  return false;
}

std::string to_upper(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

const std::string* canonical_enum(const SchemaNode& node, std::string_view value) {
  const std::string needle = trim(value);
  for (const std::string& candidate : node.enum_values) {
    if (iequals(candidate, needle)) return &candidate;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

class SchemaValidator {
 public:
  SchemaValidator(const SchemaGraph& graph, ValidationMode mode) : graph_(graph), mode_(mode) {}

  void check(const Json& value, const SchemaNode& start, const std::string& ptr) {
    const SchemaNode& node = graph_.deref(start);

    if (auto info = parse_placeholder(value)) {
      if (!is_leaf_kind(node.kind) || info->type != node_kind_name(node.kind)) {
        add(ptr, "kind mismatch",
            "placeholder of type '" + info->type + "' where " +
                std::string(node_kind_name(node.kind)) + " is expected");
      }
      return;
    }

    switch (node.kind) {
      case NodeKind::Object: {
        if (!value.is_object()) return mismatch(ptr, node, value);
        for (const auto& [key, child_value] : value.items()) {
          const SchemaNode* child = node.child(key);
          if (child == nullptr) {
            add(pointer_child(ptr, key), "unknown field", "field '" + key + "' is not defined by the schema");
            continue;
          }
          check(child_value, *child, pointer_child(ptr, key));
        }
        if (mode_ == ValidationMode::Full) {
          for (const SchemaField& field : node.children) {
            if (node.is_required(field.name) && !value.contains(field.name)) {
              add(pointer_child(ptr, field.name), "missing required field",
                  "required field '" + field.name + "' is absent");
            }
          }
        }
        return;
      }
      case NodeKind::Array: {
        if (!value.is_array()) return mismatch(ptr, node, value);
        for (std::size_t i = 0; i < value.size(); ++i) check(value[i], *node.item, pointer_index(ptr, i));
        return;
      }
      case NodeKind::String:
        if (!value.is_string()) mismatch(ptr, node, value);
        return;
      case NodeKind::Number:
        if (!value.is_number()) mismatch(ptr, node, value);
        return;
      case NodeKind::Integer:
        if (!is_integral(value)) mismatch(ptr, node, value);
        return;
      case NodeKind::Boolean:
        if (!value.is_boolean()) mismatch(ptr, node, value);
        return;
      case NodeKind::Enum:
        if (!value.is_string()) return mismatch(ptr, node, value);
        if (canonical_enum(node, value.get_ref<const std::string&>()) == nullptr) {
          add(ptr, "enum value", "'" + value.get<std::string>() + "' is not one of the allowed values");
        }
        return;
      case NodeKind::Reference:
        return;  // unreachable after deref
    }
  }

  std::vector<Violation> take() { return std::move(out_); }

 private:
  void mismatch(const std::string& ptr, const SchemaNode& node, const Json& value) {
    add(ptr, "kind mismatch",
        "expected " + std::string(node_kind_name(node.kind)) + ", found " + json_type_name(value));
  }

  void add(const std::string& ptr, std::string rule, std::string detail) {
    out_.push_back({display(ptr), std::move(rule), std::move(detail)});
  }

  const SchemaGraph& graph_;
  ValidationMode mode_;
  std::vector<Violation> out_;
};

void match_template(const Json& value, const Json& skeleton, const std::string& ptr,
                    std::vector<Violation>& out) {
  if (auto info = parse_placeholder(skeleton)) {
    if (looks_like_placeholder(value)) {
      out.push_back({display(ptr), "unfilled placeholder", "value still holds " + value.get<std::string>()});
    } else if (!matches_leaf_type(value, info->type)) {
      out.push_back({display(ptr), "kind mismatch",
                     "placeholder expects " + info->type + ", found " + json_type_name(value)});
    }
    return;
  }
  if (skeleton.is_object()) {
    if (!value.is_object()) {
      out.push_back({display(ptr), "kind mismatch", "expected object, found " + json_type_name(value)});
      return;
    }
    for (const auto& [key, child] : value.items()) {
      if (!skeleton.contains(key)) {
        out.push_back({display(pointer_child(ptr, key)), "extraneous field",
                       "field '" + key + "' is not part of the template"});
      }
    }
    for (const auto& [key, child] : skeleton.items()) {
      auto it = value.find(key);
      if (it == value.end()) {
        out.push_back({display(pointer_child(ptr, key)), "missing field",
                       "template field '" + key + "' is absent"});
        continue;
      }
      match_template(*it, child, pointer_child(ptr, key), out);
    }
    return;
  }
  if (skeleton.is_array()) {
    if (!value.is_array()) {
      out.push_back({display(ptr), "kind mismatch", "expected array, found " + json_type_name(value)});
      return;
    }
    if (skeleton.empty()) {
      if (!value.empty()) out.push_back({display(ptr), "extraneous field", "template array is empty"});
      return;
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      match_template(value[i], skeleton[0], pointer_index(ptr, i), out);
    }
    return;
  }
  if (value != skeleton) {
    out.push_back({display(ptr), "literal mismatch", "expected " + skeleton.dump()});
  }
}

// ---------------------------------------------------------------------------

bool is_currency_field(std::string_view field, const std::vector<std::string>& definitions) {
  if (field == "currency" || (field.size() > 8 && field.ends_with("Currency"))) return true;
  return std::any_of(definitions.begin(), definitions.end(), [](const std::string& name) {
    return name.find("Currency") != std::string::npos;
  });
}

Json canonical_number(const Json& value) {
  if (!value.is_number_float()) return value;
  const double d = value.get<double>();
  if (std::isfinite(d) && std::floor(d) == d && std::fabs(d) < 9.007199254740992e15) {
    return static_cast<std::int64_t>(d);
  }
  return value;
}

class Normalizer {
 public:
  explicit Normalizer(const SchemaGraph& graph) : graph_(graph) {}

  Json apply(const Json& value, const SchemaNode& start, std::string_view field, const std::string& ptr) {
    std::vector<std::string> definitions;
    const SchemaNode& node = graph_.deref(start, &definitions);
    if (parse_placeholder(value)) return value;

    switch (node.kind) {
      case NodeKind::Object: {
        if (!value.is_object()) return value;
        Json out = Json::object();
        for (const auto& [key, child_value] : value.items()) {
          const SchemaNode* child = node.child(key);
          out[key] = child ? apply(child_value, *child, key, pointer_child(ptr, key)) : child_value;
        }
        return out;
      }
      case NodeKind::Array: {
        if (!value.is_array()) return value;
        Json out = Json::array();
        for (std::size_t i = 0; i < value.size(); ++i) {
          out.push_back(apply(value[i], *node.item, field, pointer_index(ptr, i)));
        }
        return out;
      }
      case NodeKind::String:
        if (value.is_string() && is_currency_field(field, definitions)) {
          return to_upper(trim(value.get_ref<const std::string&>()));
        }
        return value;
      case NodeKind::Number:
      case NodeKind::Integer:
        return canonical_number(value);
      case NodeKind::Enum: {
        if (!value.is_string()) return value;
        if (const std::string* canonical = canonical_enum(node, value.get_ref<const std::string&>())) {
          return *canonical;
        }
        violations_.push_back({display(ptr), "unmappable enum value",
                               "'" + value.get<std::string>() + "' does not map to any of the allowed values"});
        return value;
      }
      default:
        return value;
    }
  }

  std::vector<Violation> take() { return std::move(violations_); }

 private:
  const SchemaGraph& graph_;
  std::vector<Violation> violations_;
};

}  // namespace

Json violations_to_json(const std::vector<Violation>& violations) {
  Json out = Json::array();
  for (const Violation& v : violations) {
    out.push_back({{"path", v.path}, {"rule", v.rule}, {"detail", v.detail}});
  }
  return out;
}

std::vector<Violation> violations_from_json(const Json& doc) {
  std::vector<Violation> out;
  for (const Json& entry : doc) {
    out.push_back({entry.at("path").get<std::string>(), entry.at("rule").get<std::string>(),
                   entry.at("detail").get<std::string>()});
  }
  return out;
}

Json ConformanceReport::to_json() const {
  Json out = Json::object();
  out["passed"] = passed();
  out["schema_ok"] = schema_ok;
  out["template_ok"] = template_ok;
  out["violations"] = violations_to_json(violations);
  out["normalized"] = normalized ? *normalized : Json(nullptr);
  return out;
}

ConformanceReport ConformanceReport::from_json(const Json& doc) {
  ConformanceReport report;
  report.schema_ok = doc.at("schema_ok").get<bool>();
  report.template_ok = doc.at("template_ok").get<bool>();
  report.violations = violations_from_json(doc.at("violations"));
  if (auto it = doc.find("normalized"); it != doc.end() && !it->is_null()) report.normalized = *it;
  return report;
}

std::vector<Violation> validate_against_schema(const Json& value, const SchemaGraph& graph,
                                               ValidationMode mode) {
  SchemaValidator validator(graph, mode);
  validator.check(value, graph.root_node(), "");
  return validator.take();
}

std::vector<Violation> validate_against_template(const Json& value, const Template& tmpl) {
  std::vector<Violation> out;
  match_template(value, tmpl.skeleton, "", out);
  return out;
}

NormalizeResult normalize(const Json& value, const SchemaGraph& graph) {
  Normalizer normalizer(graph);
  Json out = normalizer.apply(value, graph.root_node(), "", "");
  return {std::move(out), normalizer.take()};
}

ConformanceReport check_conformance(const Json& value, const SchemaGraph& graph, const Template& tmpl) {
  ConformanceReport report;
  auto schema = validate_against_schema(value, graph, ValidationMode::Full);
  auto shape = validate_against_template(value, tmpl);
  report.schema_ok = schema.empty();
  report.template_ok = shape.empty();
  report.violations = std::move(schema);
  report.violations.insert(report.violations.end(), shape.begin(), shape.end());
  if (!report.passed()) return report;

  NormalizeResult normalized = normalize(value, graph);
  if (!normalized.violations.empty()) {
    report.schema_ok = false;
    report.violations = std::move(normalized.violations);
    return report;
  }
  report.normalized = std::move(normalized.value);
  return report;
}

}  // namespace cdmizer
