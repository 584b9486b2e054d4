#pragma once

#include <string>
#include <string_view>

#include "cdmizer/types.hpp"

namespace cdmizer {

class ExtractError : public Error {
 public:
  enum class Kind { NoJsonObject, InvalidJson };

  ExtractError(Kind kind, const std::string& message, std::string raw)
      : Error(message), kind_(kind), raw_(std::move(raw)) {}

  Kind kind() const { return kind_; }
  const std::string& raw() const { return raw_; }

 private:
  Kind kind_;
  std::string raw_;
};

// Pulls one JSON object out of model text: prefers the first fenced block,
// takes the first balanced top-level object, and parses it strictly. A bare
// member fragment such as `"agreementTerms": {...}` is wrapped in braces.
Json extract_json(std::string_view raw);

}  // namespace cdmizer
