#include "cdmizer/types.hpp"

#include <algorithm>
#include <cctype>

namespace cdmizer {

namespace {

std::string canonical_token(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '-') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string_view clause_slug(ClauseKind clause) {
  switch (clause) {
    case ClauseKind::BaseAndEligibleCurrency:
      return "base_eligible_currency";
    case ClauseKind::Mta:
      return "mta";
    case ClauseKind::Threshold:
      return "threshold";
    case ClauseKind::Rounding:
      return "rounding";
  }
  throw Error("invalid clause kind");
}

std::string_view clause_display_name(ClauseKind clause) {
  switch (clause) {
    case ClauseKind::BaseAndEligibleCurrency:
      return "Base and Eligible Currency";
    case ClauseKind::Mta:
      return "MTA";
    case ClauseKind::Threshold:
      return "Threshold";
    case ClauseKind::Rounding:
      return "Rounding";
  }
  throw Error("invalid clause kind");
}

ClauseKind parse_clause(std::string_view text) {
  const std::string token = canonical_token(text);
  for (ClauseKind clause : kAllClauses) {
    if (token == clause_slug(clause)) return clause;
  }
  if (token == "minimum_transfer_amount") return ClauseKind::Mta;
  if (token == "base_and_eligible_currency" || token == "currency") {
    return ClauseKind::BaseAndEligibleCurrency;
  }
  throw Error("unknown clause kind '" + std::string(text) +
              "' (expected base_eligible_currency, mta, threshold or rounding)");
}

std::string_view mode_slug(Mode mode) {
  return mode == Mode::WithRag ? "with-rag" : "without-rag";
}

Mode parse_mode(std::string_view text) {
  const std::string token = canonical_token(text);
  if (token == "with_rag" || token == "rag") return Mode::WithRag;
  if (token == "without_rag" || token == "no_rag") return Mode::WithoutRag;
  throw Error("unknown mode '" + std::string(text) + "' (expected with-rag or without-rag)");
}

}  // namespace cdmizer
