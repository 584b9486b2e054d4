#include "cdmizer/schema.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "cdmizer/assets.hpp"

namespace cdmizer {

std::string_view node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Object: return "object";
    case NodeKind::Array: return "array";
    case NodeKind::String: return "string";
    case NodeKind::Number: return "number";
    case NodeKind::Integer: return "integer";
    case NodeKind::Boolean: return "boolean";
    case NodeKind::Enum: return "enum";
    case NodeKind::Reference: return "reference";
  }
  return "?";
}

bool is_leaf_kind(NodeKind kind) {
  return kind != NodeKind::Object && kind != NodeKind::Array && kind != NodeKind::Reference;
}

const SchemaNode* SchemaNode::child(std::string_view name) const {
  for (const SchemaField& field : children) {
    if (field.name == name) return &field.node;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// FieldPath

FieldPath FieldPath::parse(std::string_view text) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('/', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(start, end - start);
    if (part == kElement) {
      segments.emplace_back(kElement);
    } else if (part.size() > 2 && part.substr(part.size() - 2) == kElement) {
      segments.emplace_back(part.substr(0, part.size() - 2));
      segments.emplace_back(kElement);
    } else if (!part.empty()) {
      segments.emplace_back(part);
    }
    start = end + 1;
  }
  return FieldPath(std::move(segments));
}

FieldPath FieldPath::child(std::string_view segment) const {
  FieldPath out = *this;
  out.segments_.emplace_back(segment);
  return out;
}

FieldPath FieldPath::prefix(std::size_t length) const {
  length = std::min(length, segments_.size());
  return FieldPath(std::vector<std::string>(segments_.begin(), segments_.begin() + length));
}

std::string FieldPath::last_field() const {
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (*it != kElement) return *it;
  }
  return {};
}

std::string FieldPath::str() const {
  std::string out;
  for (const std::string& segment : segments_) {
    if (segment == kElement) {
      out += kElement;
      continue;
    }
    if (!out.empty()) out += '/';
    out += segment;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::optional<NodeKind> kind_from_name(std::string_view name) {
  static const std::map<std::string_view, NodeKind> kinds = {
      {"object", NodeKind::Object},   {"array", NodeKind::Array},
      {"string", NodeKind::String},   {"number", NodeKind::Number},
      {"integer", NodeKind::Integer}, {"boolean", NodeKind::Boolean},
      {"enum", NodeKind::Enum},       {"reference", NodeKind::Reference},
  };
  auto it = kinds.find(name);
  if (it == kinds.end()) return std::nullopt;
  return it->second;
}

bool key_allowed(NodeKind kind, std::string_view key) {
  if (key == "kind") return true;
  switch (kind) {
    case NodeKind::Object: return key == "children" || key == "required";
    case NodeKind::Array: return key == "item";
    case NodeKind::Enum: return key == "values";
    case NodeKind::Reference: return key == "ref";
    default: return false;
  }
}

SchemaNode parse_node(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw SchemaError(path, "node must be a JSON object");
  auto kind_it = doc.find("kind");
  if (kind_it == doc.end() || !kind_it->is_string()) {
    throw SchemaError(path, "node is missing a string 'kind'");
  }
  const auto kind = kind_from_name(kind_it->get<std::string>());
  if (!kind) {
    throw SchemaError(path + "/kind", "unknown node kind '" + kind_it->get<std::string>() + "'");
  }
  for (const auto& [key, value] : doc.items()) {
    if (!key_allowed(*kind, key)) {
      throw SchemaError(path + "/" + key, "field not allowed for kind '" +
                                              std::string(node_kind_name(*kind)) + "'");
    }
  }

  SchemaNode node;
  node.kind = *kind;
  switch (*kind) {
    case NodeKind::Object: {
      if (auto it = doc.find("children"); it != doc.end()) {
        if (!it->is_object()) throw SchemaError(path + "/children", "must be an object");
        for (const auto& [name, child] : it->items()) {
          if (name.empty() || name == FieldPath::kElement || name.find('/') != std::string::npos) {
            throw SchemaError(path + "/children", "invalid field name '" + name + "'");
          }
          node.children.push_back({name, parse_node(child, path + "/children/" + name)});
        }
      }
      if (auto it = doc.find("required"); it != doc.end()) {
        if (!it->is_array()) throw SchemaError(path + "/required", "must be an array");
        for (const Json& name : *it) {
          if (!name.is_string()) throw SchemaError(path + "/required", "entries must be strings");
          const auto text = name.get<std::string>();
          if (node.child(text) == nullptr) {
            throw SchemaError(path + "/required", "required field '" + text + "' is not a child");
          }
          node.required.insert(text);
        }
      }
      break;
    }
    case NodeKind::Array: {
      auto it = doc.find("item");
      if (it == doc.end()) throw SchemaError(path, "array node is missing 'item'");
      node.item = std::make_shared<const SchemaNode>(parse_node(*it, path + "/item"));
      break;
    }
    case NodeKind::Enum: {
      auto it = doc.find("values");
      if (it == doc.end() || !it->is_array() || it->empty()) {
        throw SchemaError(path + "/values", "enum node needs a non-empty 'values' list");
      }
      for (const Json& value : *it) {
        if (!value.is_string()) throw SchemaError(path + "/values", "enum values must be strings");
        node.enum_values.push_back(value.get<std::string>());
      }
      break;
    }
    case NodeKind::Reference: {
      auto it = doc.find("ref");
      if (it == doc.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw SchemaError(path + "/ref", "reference node needs a definition name in 'ref'");
      }
      node.target = it->get<std::string>();
      break;
    }
    default:
      break;
  }
  return node;
}

void collect_references(const SchemaNode& node, const std::string& path,
                        std::vector<std::pair<std::string, std::string>>& out) {
  switch (node.kind) {
    case NodeKind::Object:
      for (const SchemaField& field : node.children) {
        collect_references(field.node, path + "/children/" + field.name, out);
      }
      break;
    case NodeKind::Array:
      collect_references(*node.item, path + "/item", out);
      break;
    case NodeKind::Reference:
      out.emplace_back(path, node.target);
      break;
    default:
      break;
  }
}

// Tarjan's strongly connected components over the definition reference graph.
std::set<std::string, std::less<>> find_cycle_members(
    const std::vector<std::string>& names,
    const std::map<std::string, std::set<std::string>>& edges) {
  std::map<std::string, int> index;
  std::map<std::string, int> low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::set<std::string, std::less<>> members;
  int counter = 0;

  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    index[name] = low[name] = counter++;
    stack.push_back(name);
    on_stack.insert(name);
    for (const std::string& next : edges.at(name)) {
      if (!index.count(next)) {
        visit(next);
        low[name] = std::min(low[name], low[next]);
      } else if (on_stack.count(next)) {
        low[name] = std::min(low[name], index[next]);
      }
    }
    if (low[name] != index[name]) return;
    std::vector<std::string> component;
    std::string top;
    do {
      top = stack.back();
      stack.pop_back();
      on_stack.erase(top);
      component.push_back(top);
    } while (top != name);
    if (component.size() > 1 || edges.at(name).count(name)) {
      members.insert(component.begin(), component.end());
    }
  };

  for (const std::string& name : names) {
    if (!index.count(name)) visit(name);
  }
  return members;
}

}  // namespace

SchemaGraph schema_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("", "schema document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "root" && key != "definitions") throw SchemaError("/" + key, "unknown top-level field");
  }
  auto root_it = doc.find("root");
  if (root_it == doc.end() || !root_it->is_string()) {
    throw SchemaError("/root", "schema needs a string 'root'");
  }
  auto defs_it = doc.find("definitions");
  if (defs_it == doc.end() || !defs_it->is_object() || defs_it->empty()) {
    throw SchemaError("/definitions", "schema needs a non-empty 'definitions' object");
  }

  SchemaGraph graph;
  graph.root_ = root_it->get<std::string>();
  for (const auto& [name, node] : defs_it->items()) {
    graph.order_.push_back(name);
    graph.definitions_.emplace(name, parse_node(node, "/definitions/" + name));
  }
  if (!graph.definitions_.count(graph.root_)) {
    throw SchemaError("/root", "root definition '" + graph.root_ + "' does not exist");
  }

  std::map<std::string, std::set<std::string>> edges;
  for (const std::string& name : graph.order_) {
    std::vector<std::pair<std::string, std::string>> refs;
    collect_references(graph.definitions_.at(name), "/definitions/" + name, refs);
    auto& out = edges[name];
    for (const auto& [path, target] : refs) {
      if (!graph.definitions_.count(target)) {
        throw SchemaError(path + "/ref", "dangling reference to '" + target + "'");
      }
      out.insert(target);
    }
  }
  graph.cycle_members_ = find_cycle_members(graph.order_, edges);
  return graph;
}

SchemaGraph parse_schema(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("malformed schema document: ") + e.what());
  }
  return schema_from_json(doc);
}

SchemaGraph load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open schema file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_schema(buffer.str());
  } catch (const SchemaError& e) {
    throw SchemaError(e.path(), std::string(e.what()) + " [in " + path + "]");
  }
}

const SchemaGraph& fixture_schema() {
  static const SchemaGraph graph = parse_schema(assets::fixture_schema());
  return graph;
}

const SchemaNode& SchemaGraph::definition(std::string_view name) const {
  auto it = definitions_.find(name);
  if (it == definitions_.end()) throw Error("unknown definition '" + std::string(name) + "'");
  return it->second;
}

bool SchemaGraph::has_definition(std::string_view name) const {
  return definitions_.find(name) != definitions_.end();
}

bool SchemaGraph::is_cycle_member(std::string_view name) const {
  return cycle_members_.find(name) != cycle_members_.end();
}

const SchemaNode& SchemaGraph::deref(const SchemaNode& node, std::vector<std::string>* visited) const {
  const SchemaNode* current = &node;
  std::size_t hops = 0;
  while (current->kind == NodeKind::Reference) {
    if (++hops > definitions_.size()) {
      throw SchemaError("/definitions/" + current->target,
                        "reference cycle never reaches a structural node");
    }
    if (visited) visited->push_back(current->target);
    current = &definition(current->target);
  }
  return *current;
}

Json node_to_json(const SchemaNode& node) {
  Json out = Json::object();
  out["kind"] = node_kind_name(node.kind);
  switch (node.kind) {
    case NodeKind::Object: {
      Json children = Json::object();
      for (const SchemaField& field : node.children) children[field.name] = node_to_json(field.node);
      out["children"] = std::move(children);
      if (!node.required.empty()) {
        Json required = Json::array();
        // Emit in child order so the excerpt reads like the source document.
        for (const SchemaField& field : node.children) {
          if (node.is_required(field.name)) required.push_back(field.name);
        }
        out["required"] = std::move(required);
      }
      break;
    }
    case NodeKind::Array:
      out["item"] = node_to_json(*node.item);
      break;
    case NodeKind::Enum:
      out["values"] = node.enum_values;
      break;
    case NodeKind::Reference:
      out["ref"] = node.target;
      break;
    default:
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Navigation

const SchemaNode& resolve(const SchemaGraph& graph, const FieldPath& path) {
  if (path.empty()) throw PathError(path, {}, "path is empty");
  const SchemaNode* node = &graph.deref(graph.root_node());
  const auto& segments = path.segments();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::string& segment = segments[i];
    if (segment == FieldPath::kElement) {
      if (node->kind != NodeKind::Array) {
        throw PathError(path, path.prefix(i),
                        "'[]' applied to a " + std::string(node_kind_name(node->kind)) + " node");
      }
      node = &graph.deref(*node->item);
      continue;
    }
    if (node->kind != NodeKind::Object) {
      throw PathError(path, path.prefix(i),
                      "segment '" + segment + "' below a " +
                          std::string(node_kind_name(node->kind)) + " node");
    }
    const SchemaNode* child = node->child(segment);
    if (child == nullptr) throw PathError(path, path.prefix(i), "no field '" + segment + "'");
    node = &graph.deref(*child);
  }
  return *node;
}

namespace {

struct LeafWalker {
  const SchemaGraph& graph;
  std::size_t max_depth;
  std::vector<std::string> segments;
  std::vector<std::string> definitions_on_path;
  std::vector<FieldPath> out;

  void walk(const SchemaNode& start) {
    const SchemaNode* node = &start;
    std::size_t entered = 0;
    while (node->kind == NodeKind::Reference) {
      const auto& seen = definitions_on_path;
      if (std::find(seen.begin(), seen.end(), node->target) != seen.end()) {
        definitions_on_path.resize(definitions_on_path.size() - entered);
        return;
      }
      definitions_on_path.push_back(node->target);
      ++entered;
      node = &graph.definition(node->target);
    }

    if (is_leaf_kind(node->kind)) {
      if (!segments.empty()) out.emplace_back(segments);
    } else if (segments.size() < max_depth) {
      if (node->kind == NodeKind::Object) {
        for (const SchemaField& field : node->children) {
          segments.push_back(field.name);
          walk(field.node);
          segments.pop_back();
        }
      } else {
        segments.emplace_back(FieldPath::kElement);
        walk(*node->item);
        segments.pop_back();
      }
    }
    definitions_on_path.resize(definitions_on_path.size() - entered);
  }
};

}  // namespace

std::vector<FieldPath> enumerate_leaf_paths(const SchemaGraph& graph, std::size_t max_depth) {
  if (max_depth == 0) throw Error("max_depth must be at least 1");
  LeafWalker walker{graph, max_depth, {}, {}, {}};
  SchemaNode root_ref;
  root_ref.kind = NodeKind::Reference;
  root_ref.target = graph.root();
  walker.walk(root_ref);
  return std::move(walker.out);
}

}  // namespace cdmizer
