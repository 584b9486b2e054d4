#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cdmizer/types.hpp"

namespace cdmizer {

enum class NodeKind { Object, Array, String, Number, Integer, Boolean, Enum, Reference };

std::string_view node_kind_name(NodeKind kind);
bool is_leaf_kind(NodeKind kind);

struct SchemaField;

// One node of the schema dialect. Only the members belonging to `kind` are
// populated; the parser rejects anything else.
struct SchemaNode {
  NodeKind kind = NodeKind::String;
  std::vector<SchemaField> children;     // Object, document order
  std::set<std::string> required;        // Object, subset of child names
  std::shared_ptr<const SchemaNode> item;  // Array
  std::vector<std::string> enum_values;  // Enum
  std::string target;                    // Reference

  const SchemaNode* child(std::string_view name) const;
  bool is_required(std::string_view name) const { return required.count(std::string(name)) > 0; }
};

struct SchemaField {
  std::string name;
  SchemaNode node;
};

// Address of a node relative to the schema root. A segment is either a field
// name or the array-element marker "[]".
class FieldPath {
 public:
  static constexpr std::string_view kElement = "[]";

  FieldPath() = default;
  explicit FieldPath(std::vector<std::string> segments) : segments_(std::move(segments)) {}

  // "a/b[]/c" and "a/b/[]/c" both give {a, b, [], c}.
  static FieldPath parse(std::string_view text);

  const std::vector<std::string>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }

  FieldPath child(std::string_view segment) const;
  FieldPath prefix(std::size_t length) const;
  // Field name of the deepest non-element segment, "" if none.
  std::string last_field() const;

  std::string str() const;

  auto operator<=>(const FieldPath&) const = default;

 private:
  std::vector<std::string> segments_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class PathError : public Error {
 public:
  PathError(const FieldPath& path, FieldPath resolvable_prefix, const std::string& message)
      : Error("cannot resolve '" + path.str() + "': " + message +
              " (longest resolvable prefix: '" + resolvable_prefix.str() + "')"),
        prefix_(std::move(resolvable_prefix)) {}
  const FieldPath& resolvable_prefix() const { return prefix_; }

 private:
  FieldPath prefix_;
};

// Immutable after construction; safe to share between threads.
class SchemaGraph {
 public:
  const std::string& root() const { return root_; }
  const std::vector<std::string>& definition_order() const { return order_; }
  const SchemaNode& definition(std::string_view name) const;
  bool has_definition(std::string_view name) const;
  bool is_cycle_member(std::string_view name) const;

  // Follows reference nodes until a structural node is reached. When
  // `visited` is given, every definition entered along the way is recorded.
  const SchemaNode& deref(const SchemaNode& node, std::vector<std::string>* visited = nullptr) const;

  const SchemaNode& root_node() const { return definition(root_); }

 private:
  friend SchemaGraph parse_schema(std::string_view text);
  friend SchemaGraph schema_from_json(const Json& doc);

  std::string root_;
  std::vector<std::string> order_;
  std::map<std::string, SchemaNode, std::less<>> definitions_;
  std::set<std::string, std::less<>> cycle_members_;
};

SchemaGraph parse_schema(std::string_view text);
SchemaGraph schema_from_json(const Json& doc);
SchemaGraph load_schema_file(const std::string& path);
// Compiled-in CDM subset used by the fixture corpus.
const SchemaGraph& fixture_schema();

// Serializes a node back into the dialect (used for prompt schema excerpts).
Json node_to_json(const SchemaNode& node);

const SchemaNode& resolve(const SchemaGraph& graph, const FieldPath& path);

inline constexpr std::size_t kDefaultMaxDepth = 32;

std::vector<FieldPath> enumerate_leaf_paths(const SchemaGraph& graph,
                                            std::size_t max_depth = kDefaultMaxDepth);

}  // namespace cdmizer
