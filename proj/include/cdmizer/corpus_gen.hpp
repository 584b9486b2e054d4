#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "cdmizer/corpus.hpp"

namespace cdmizer {

// Synthetic CSA fixture corpus. Document "csa-001" embeds the published MTA
// clause excerpt verbatim, with its published CDM representation as truth.
struct CorpusGenOptions {
  std::size_t docs = 60;
  std::size_t threshold_docs = 37;
  std::uint32_t seed = 20251;
};

inline constexpr std::string_view kMtaFixtureId = "csa-001";

Corpus generate_fixture_corpus(const CorpusGenOptions& options = {});

// Writes the corpus layout; with `mock_responses`, also <dir>/mock/<id>.<clause>.txt
// holding each ground truth in a ```json fence, usable as llm.mock_dir.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir, bool mock_responses);

// The MTA excerpt and its CDM representation exactly as published; the JSON
// is a bare member fragment without enclosing braces.
std::string_view mta_example_clause_text();
std::string_view mta_example_cdm_text();
// The same representation as a complete JSON document.
Json mta_example_truth();

}  // namespace cdmizer
