#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cdmizer/backend.hpp"
#include "cdmizer/corpus.hpp"
#include "cdmizer/retrieval.hpp"
#include "cdmizer/schema.hpp"
#include "cdmizer/template.hpp"

namespace cdmizer {

// Versioned prompt wording. Values may reference {{name}} variables.
struct PromptTemplate {
  std::string version;
  std::string system;
  std::string schema_section;
  std::string template_section;
  std::string examples_section;
  std::string example_block;
  std::string contract_section;
  std::string instructions_section;
  std::string retry;

  static PromptTemplate from_json(const Json& doc);
  static PromptTemplate load(const std::filesystem::path& path);
  static const PromptTemplate& builtin();
};

// Replaces every {{key}}; unknown variables are left untouched.
std::string fill_variables(std::string_view text, const std::vector<std::pair<std::string, std::string>>& vars);

struct PromptSection {
  std::string name;  // schema | template | examples | contract | instructions
  std::string body;  // raw content
  std::string text;  // body with its heading, as sent
};

struct PromptBundle {
  std::string system;
  std::vector<PromptSection> sections;
  std::vector<std::string> example_blocks;  // retrieval order
  PromptMeta meta;
  std::string prompt_version;

  const PromptSection* section(std::string_view name) const;
  std::string user() const;  // sections joined by blank lines
};

// Definitions entered while walking the template skeleton, each pruned to the
// fields the skeleton keeps. Serialized in the schema dialect.
Json schema_excerpt(const Template& tmpl, const SchemaGraph& graph);

// Examples must be empty iff mode is WithoutRag.
PromptBundle assemble_prompt(const Template& tmpl, const SchemaGraph& graph, const ContractDoc& doc,
                             const std::vector<RetrievedExample>& examples, Mode mode,
                             const PromptTemplate& wording = PromptTemplate::builtin());

std::vector<ChatMessage> initial_messages(const PromptBundle& bundle);

// Returns the model text for a bundle (first attempt, no retry history).
std::string complete(const PromptBundle& bundle, Gateway& gateway);

}  // namespace cdmizer
