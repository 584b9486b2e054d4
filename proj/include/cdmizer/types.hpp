#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cdmizer {

// Field order is semantic everywhere (templates must be byte-deterministic).
using Json = nlohmann::ordered_json;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClauseKind { BaseAndEligibleCurrency, Mta, Threshold, Rounding };

inline constexpr std::array<ClauseKind, 4> kAllClauses = {
    ClauseKind::BaseAndEligibleCurrency, ClauseKind::Mta, ClauseKind::Threshold,
    ClauseKind::Rounding};

// Stable identifier used in file names, registry keys and URLs.
std::string_view clause_slug(ClauseKind clause);
// Column heading, e.g. "Base and Eligible Currency".
std::string_view clause_display_name(ClauseKind clause);
// Accepts the slug, with '-' or '_' separators, case-insensitively.
ClauseKind parse_clause(std::string_view text);

enum class Mode { WithRag, WithoutRag };

inline constexpr std::array<Mode, 2> kAllModes = {Mode::WithRag, Mode::WithoutRag};

std::string_view mode_slug(Mode mode);
Mode parse_mode(std::string_view text);

}  // namespace cdmizer
