#include "cdmizer/template.hpp"

#include <algorithm>
#include <fstream>

#include "cdmizer/assets.hpp"

namespace cdmizer {

namespace {

constexpr std::string_view kSentinelPrefix = "<<FILL|";
constexpr std::string_view kSentinelSuffix = ">>";

}  // namespace

// ---------------------------------------------------------------------------
// Registry

TargetRegistry TargetRegistry::from_json(const Json& doc) {
  if (!doc.is_object()) throw Error("target registry must be a JSON object");
  TargetRegistry registry;
  for (const auto& [key, paths] : doc.items()) {
    const ClauseKind clause = parse_clause(key);
    if (!paths.is_array() || paths.empty()) {
      throw Error("target registry entry '" + key + "' must be a non-empty list of paths");
    }
    TargetSet set{clause, {}};
    for (const Json& path : paths) {
      if (!path.is_string()) throw Error("target registry entry '" + key + "' has a non-string path");
      FieldPath parsed = FieldPath::parse(path.get<std::string>());
      if (parsed.empty()) throw Error("target registry entry '" + key + "' has an empty path");
      if (std::find(set.targets.begin(), set.targets.end(), parsed) == set.targets.end()) {
        set.targets.push_back(std::move(parsed));
      }
    }
    registry.sets_[clause] = std::move(set);
  }
  return registry;
}

TargetRegistry TargetRegistry::builtin() {
  static const TargetRegistry registry = from_json(Json::parse(assets::target_registry()));
  return registry;
}

TargetRegistry TargetRegistry::with_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open target registry '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error("malformed target registry '" + path + "': " + e.what());
  }
  TargetRegistry registry = builtin();
  for (auto& [clause, set] : from_json(doc).sets_) registry.sets_[clause] = std::move(set);
  return registry;
}

const TargetSet& TargetRegistry::at(ClauseKind clause) const {
  auto it = sets_.find(clause);
  if (it == sets_.end()) {
    throw Error("no targets registered for clause '" + std::string(clause_slug(clause)) + "'");
  }
  return it->second;
}

TargetSet builtin_targets(ClauseKind clause) { return TargetRegistry::builtin().at(clause); }

// ---------------------------------------------------------------------------
// Placeholders

std::string placeholder_token(NodeKind kind, std::string_view hint) {
  std::string out(kSentinelPrefix);
  out += node_kind_name(kind);
  out += '|';
  out += hint;
  out += kSentinelSuffix;
  return out;
}

bool looks_like_placeholder(const Json& value) {
  return value.is_string() && value.get_ref<const std::string&>().find(kSentinelPrefix) != std::string::npos;
}

std::optional<PlaceholderInfo> parse_placeholder(const Json& value) {
  if (!value.is_string()) return std::nullopt;
  std::string_view text = value.get_ref<const std::string&>();
  if (!text.starts_with(kSentinelPrefix) || !text.ends_with(kSentinelSuffix)) return std::nullopt;
  text.remove_prefix(kSentinelPrefix.size());
  text.remove_suffix(kSentinelSuffix.size());
  const auto bar = text.find('|');
  if (bar == std::string_view::npos) return std::nullopt;
  return PlaceholderInfo{std::string(text.substr(0, bar)), std::string(text.substr(bar + 1))};
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct TargetTrie {
  std::map<std::string, TargetTrie> next;
  bool terminal = false;
};

class TemplateBuilder {
 public:
  explicit TemplateBuilder(const SchemaGraph& graph) : graph_(graph) {}

  Json build(const SchemaNode& start, const TargetTrie& trie, const FieldPath& path) {
    const SchemaNode& node = graph_.deref(start);
    if (trie.terminal) {
      if (!is_leaf_kind(node.kind)) {
        throw Error("target '" + path.str() + "' is a " + std::string(node_kind_name(node.kind)) +
                    " node, not a scalar or enum leaf");
      }
      return placeholder(node, path);
    }
    if (node.kind == NodeKind::Object) {
      Json out = Json::object();
      for (const SchemaField& field : node.children) {
        auto it = trie.next.find(field.name);
        if (it != trie.next.end()) {
          out[field.name] = build(field.node, it->second, path.child(field.name));
        } else if (node.is_required(field.name)) {
          std::vector<std::string> chain;
          out[field.name] = fill_required(field.node, path.child(field.name), chain);
        }
      }
      return out;
    }
    if (node.kind == NodeKind::Array) {
      const TargetTrie& element = trie.next.at(std::string(FieldPath::kElement));
      return Json::array({build(*node.item, element, path.child(FieldPath::kElement))});
    }
    return placeholder(node, path);
  }

  std::vector<FieldPath> take_paths() { return std::move(paths_); }

 private:
  // Minimal instance of a required field: its own required descendants only.
  Json fill_required(const SchemaNode& start, const FieldPath& path, std::vector<std::string>& chain) {
    std::vector<std::string> entered;
    const SchemaNode& node = graph_.deref(start, &entered);
    for (const std::string& name : entered) {
      if (std::find(chain.begin(), chain.end(), name) != chain.end()) {
        throw Error("required fields form a cycle through '" + name + "' at '" + path.str() + "'");
      }
    }
    chain.insert(chain.end(), entered.begin(), entered.end());

    Json out;
    if (node.kind == NodeKind::Object) {
      out = Json::object();
      for (const SchemaField& field : node.children) {
        if (node.is_required(field.name)) {
          out[field.name] = fill_required(field.node, path.child(field.name), chain);
        }
      }
    } else if (node.kind == NodeKind::Array) {
      out = Json::array({fill_required(*node.item, path.child(FieldPath::kElement), chain)});
    } else {
      out = placeholder(node, path);
    }
    chain.resize(chain.size() - entered.size());
    return out;
  }

  Json placeholder(const SchemaNode& node, const FieldPath& path) {
    paths_.push_back(path);
    return placeholder_token(node.kind, path.last_field());
  }

  const SchemaGraph& graph_;
  std::vector<FieldPath> paths_;
};

}  // namespace

Template generate_template(const SchemaGraph& graph, const TargetSet& targets) {
  if (targets.targets.empty()) throw Error("target set is empty");
  TargetTrie trie;
  for (const FieldPath& target : targets.targets) {
    const SchemaNode& node = resolve(graph, target);
    if (!is_leaf_kind(node.kind)) {
      throw Error("target '" + target.str() + "' is a " + std::string(node_kind_name(node.kind)) +
                  " node, not a scalar or enum leaf");
    }
    TargetTrie* cursor = &trie;
    for (const std::string& segment : target.segments()) cursor = &cursor->next[segment];
    cursor->terminal = true;
  }

  TemplateBuilder builder(graph);
  Template out;
  out.clause = targets.clause;
  out.skeleton = builder.build(graph.root_node(), trie, FieldPath{});
  out.placeholder_paths = builder.take_paths();
  return out;
}

std::string render(const Template& tmpl) { return tmpl.skeleton.dump(2) + "\n"; }

}  // namespace cdmizer
