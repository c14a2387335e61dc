#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "capforge/core/types.hpp"

namespace capforge {

struct ScorerReply {
  Score score;
  std::string suggestion;
  friend bool operator==(const ScorerReply&, const ScorerReply&) = default;
};

enum class ParseFailureReason { kNoObject, kBadScore, kMissingField, kNonInteger };

std::string_view to_string(ParseFailureReason r);

struct ParseFailure {
  ParseFailureReason reason = ParseFailureReason::kNoObject;
  std::string raw;
  friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

using ScorerResult = std::variant<ScorerReply, ParseFailure>;

/// Removes markdown code fences (``` with an optional language tag), keeping
/// the fenced content in place.
std::string strip_code_fences(std::string_view text);

/// Returns the first substring starting at a '{' whose braces balance, with
/// quoted strings and escapes honoured. Empty when there is none.
std::string_view first_balanced_object(std::string_view text);

/// Total: never throws, always returns a reply or a categorized failure.
///
/// Leniency, in order: strip code fences, take the first balanced object that
/// parses as JSON, then require an integer "score" in [0,100] and a string
/// "suggestions".
ScorerResult parse_scorer_reply(std::string_view raw) noexcept;

}  // namespace capforge
