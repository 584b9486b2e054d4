#include "cdmizer/prompt.hpp"

#include <map>
#include <set>

#include <fmt/format.h>

#include "cdmizer/assets.hpp"

namespace cdmizer {

PromptTemplate PromptTemplate::from_json(const Json& doc) {
  try {
    const Json& sections = doc.at("sections");
    PromptTemplate out;
    out.version = doc.at("version").get<std::string>();
    out.system = doc.at("system").get<std::string>();
    out.schema_section = sections.at("schema").get<std::string>();
    out.template_section = sections.at("template").get<std::string>();
    out.examples_section = sections.at("examples").get<std::string>();
    out.example_block = sections.at("example").get<std::string>();
    out.contract_section = sections.at("contract").get<std::string>();
    out.instructions_section = sections.at("instructions").get<std::string>();
    out.retry = doc.at("retry").get<std::string>();
    return out;
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid prompt file: ") + e.what());
  }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_text_file(path)));
  } catch (const Json::parse_error& e) {
    throw Error("malformed prompt file '" + path.string() + "': " + e.what());
  }
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate wording = from_json(Json::parse(assets::default_prompt()));
  return wording;
}

std::string fill_variables(std::string_view text, const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string_view key = text.substr(open + 2, close - open - 2);
    bool replaced = false;
    for (const auto& [name, value] : vars) {
      if (name == key) {
        out += value;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.append(text.substr(open, close + 2 - open));
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

const PromptSection* PromptBundle::section(std::string_view name) const {
  for (const PromptSection& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string PromptBundle::user() const {
  std::string out;
  for (const PromptSection& s : sections) {
    if (!out.empty()) out += "\n\n";
    out += s.text;
  }
  return out;
}

namespace {

struct ExcerptWalker {
  const SchemaGraph& graph;
  std::set<std::string> definitions;
  std::map<const SchemaNode*, std::set<std::string>> kept_children;

  void walk(const Json& skeleton, const SchemaNode& start) {
    std::vector<std::string> entered;
    const SchemaNode& node = graph.deref(start, &entered);
    definitions.insert(entered.begin(), entered.end());
    if (node.kind == NodeKind::Object && skeleton.is_object()) {
      auto& kept = kept_children[&node];
      for (const auto& [key, value] : skeleton.items()) {
        if (const SchemaNode* child = node.child(key)) {
          kept.insert(key);
          walk(value, *child);
        }
      }
    } else if (node.kind == NodeKind::Array && skeleton.is_array() && !skeleton.empty()) {
      walk(skeleton[0], *node.item);
    }
  }

  Json prune(const SchemaNode& node) const {
    if (node.kind == NodeKind::Array) {
      Json out = node_to_json(node);
      out["item"] = prune(*node.item);
      return out;
    }
    if (node.kind != NodeKind::Object) return node_to_json(node);
    static const std::set<std::string> none;
    auto it = kept_children.find(&node);
    const std::set<std::string>& kept = it == kept_children.end() ? none : it->second;
    Json out = Json::object();
    out["kind"] = "object";
    Json children = Json::object();
    Json required = Json::array();
    for (const SchemaField& field : node.children) {
      if (!kept.count(field.name)) continue;
      children[field.name] = prune(field.node);
      if (node.is_required(field.name)) required.push_back(field.name);
    }
    out["children"] = std::move(children);
    if (!required.empty()) out["required"] = std::move(required);
    return out;
  }
};

std::string format_similarity(double similarity) { return fmt::format("{:.4f}", similarity); }

}  // namespace

Json schema_excerpt(const Template& tmpl, const SchemaGraph& graph) {
  ExcerptWalker walker{graph, {graph.root()}, {}};
  walker.walk(tmpl.skeleton, graph.root_node());
  Json definitions = Json::object();
  for (const std::string& name : graph.definition_order()) {
    if (walker.definitions.count(name)) definitions[name] = walker.prune(graph.definition(name));
  }
  return Json{{"root", graph.root()}, {"definitions", std::move(definitions)}};
}

PromptBundle assemble_prompt(const Template& tmpl, const SchemaGraph& graph, const ContractDoc& doc,
                             const std::vector<RetrievedExample>& examples, Mode mode, const PromptTemplate& wording) {
  if (mode == Mode::WithoutRag && !examples.empty()) {
    throw Error("examples supplied for a without-rag prompt");
  }

  const std::string clause_name(clause_display_name(tmpl.clause));
  PromptBundle bundle;
  bundle.system = wording.system;
  bundle.meta = PromptMeta{doc.id, tmpl.clause, mode, examples.size()};
  bundle.prompt_version = wording.version;

  auto add = [&](std::string name, std::string body, const std::string& heading_template, const char* var) {
    std::string text = fill_variables(heading_template, {{var, body}, {"clause_name", clause_name}});
    bundle.sections.push_back({std::move(name), std::move(body), std::move(text)});
  };

  add("schema", schema_excerpt(tmpl, graph).dump(2), wording.schema_section, "schema");
  add("template", render(tmpl), wording.template_section, "template");

  if (mode == Mode::WithRag) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const RetrievedExample& ex = examples[i];
      bundle.example_blocks.push_back(fill_variables(wording.example_block, {
                                                                                {"n", std::to_string(i + 1)},
                                                                                {"doc_id", ex.doc_id},
                                                                                {"similarity", format_similarity(ex.similarity)},
                                                                                {"excerpt", ex.excerpt},
                                                                                {"truth", ex.clause_truth.dump(2)},
                                                                            }));
    }
    std::string joined;
    for (const std::string& block : bundle.example_blocks) {
      if (!joined.empty()) joined += "\n\n";
      joined += block;
    }
    if (bundle.example_blocks.empty()) joined = "(no examples available)";
    add("examples", std::move(joined), wording.examples_section, "examples");
  }

  add("contract", doc.text, wording.contract_section, "contract");
  add("instructions", fill_variables(wording.instructions_section, {{"clause_name", clause_name}}), "{{instructions}}",
      "instructions");
  return bundle;
}

std::vector<ChatMessage> initial_messages(const PromptBundle& bundle) {
  return {{"system", bundle.system}, {"user", bundle.user()}};
}

std::string complete(const PromptBundle& bundle, Gateway& gateway) {
  return gateway.complete(ChatRequest{bundle.meta, initial_messages(bundle), 1}).text;
}

}  // namespace cdmizer
