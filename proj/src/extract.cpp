#include "cdmizer/extract.hpp"

#include <cctype>
#include <optional>

namespace cdmizer {

namespace {

std::string_view fenced_body(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body_start = text.find('\n', open + 3);
  if (body_start == std::string_view::npos) return text.substr(open + 3);
  ++body_start;
  const auto close = text.find("```", body_start);
  return close == std::string_view::npos ? text.substr(body_start) : text.substr(body_start, close - body_start);
}

// Index one past the '}' matching the '{' at `start`, honouring strings.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

// `"key"` followed by ':' and nothing else before `brace`.
std::optional<std::size_t> bare_member_start(std::string_view text, std::size_t brace) {
  std::size_t i = 0;
  while (i < brace && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i >= brace || text[i] != '"') return std::nullopt;
  const std::size_t key_start = i;
  ++i;
  while (i < brace && text[i] != '"') {
    if (text[i] == '\\') ++i;
    ++i;
  }
  if (i >= brace) return std::nullopt;
  ++i;
  while (i < brace && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i >= brace || text[i] != ':') return std::nullopt;
  ++i;
  while (i < brace && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  return i == brace ? std::optional<std::size_t>(key_start) : std::nullopt;
}

}  // namespace

Json extract_json(std::string_view raw) {
  const std::string_view text = fenced_body(raw);
  const auto brace = text.find('{');
  if (brace == std::string_view::npos) {
    throw ExtractError(ExtractError::Kind::NoJsonObject, "no JSON object found in model output", std::string(raw));
  }
  const auto end = balanced_end(text, brace);
  if (!end) {
    throw ExtractError(ExtractError::Kind::InvalidJson, "unbalanced JSON object in model output", std::string(raw));
  }

  std::string candidate;
  if (const auto key = bare_member_start(text, brace)) {
    candidate = "{" + std::string(text.substr(*key, *end - *key)) + "}";
  } else {
    candidate = std::string(text.substr(brace, *end - brace));
  }
  try {
    return Json::parse(candidate);
  } catch (const Json::parse_error& e) {
    throw ExtractError(ExtractError::Kind::InvalidJson, std::string("invalid JSON in model output: ") + e.what(),
                       std::string(raw));
  }
}

}  // namespace cdmizer
