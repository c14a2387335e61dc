#include "capforge/gateway/scorer_parser.hpp"

#include <cctype>

namespace capforge {

std::string_view to_string(ParseFailureReason r) {
  switch (r) {
    case ParseFailureReason::kNoObject: return "no_object";
    case ParseFailureReason::kBadScore: return "bad_score";
    case ParseFailureReason::kMissingField: return "missing_field";
    case ParseFailureReason::kNonInteger: return "non_integer";
  }
  return "no_object";
}

std::string strip_code_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 3, "```") == 0) {
      i += 3;
      // language tag, e.g. ```json
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_' ||
                                 text[i] == '-')) {
        ++i;
      }
      out.push_back(' ');
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

namespace {

// Length of the balanced object starting at text[start] == '{', or npos.
std::size_t balanced_length(std::string_view text, std::size_t start) {
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
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i - start + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view first_balanced_object(std::string_view text) {
  for (auto pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    const auto len = balanced_length(text, pos);
    if (len != std::string_view::npos) return text.substr(pos, len);
  }
  return {};
}

ScorerResult parse_scorer_reply(std::string_view raw) noexcept {
  const auto fail = [&](ParseFailureReason r) -> ScorerResult {
    try {
      return ParseFailure{r, std::string(raw)};
    } catch (...) {
      return ParseFailure{r, {}};
    }
  };
  try {
    const auto cleaned = strip_code_fences(raw);
    const std::string_view view(cleaned);

    json obj;
    bool found = false;
    for (auto pos = view.find('{'); pos != std::string_view::npos; pos = view.find('{', pos + 1)) {
      const auto len = balanced_length(view, pos);
      if (len == std::string_view::npos) continue;
      auto parsed = json::parse(view.substr(pos, len), nullptr, /*allow_exceptions=*/false);
      if (parsed.is_object()) {
        obj = std::move(parsed);
        found = true;
        break;
      }
    }
    if (!found) return fail(ParseFailureReason::kNoObject);

    if (!obj.contains("score") || !obj.contains("suggestions")) return fail(ParseFailureReason::kMissingField);
    const auto& score = obj["score"];
    const auto& sugg = obj["suggestions"];
    if (!sugg.is_string()) return fail(ParseFailureReason::kMissingField);
    if (score.is_number_float()) return fail(ParseFailureReason::kNonInteger);
    if (!score.is_number_integer()) return fail(ParseFailureReason::kBadScore);
    if (score.is_number_unsigned()) {
      const auto v = score.get<std::uint64_t>();
      if (v > 100) return fail(ParseFailureReason::kBadScore);
      return ScorerReply{Score(static_cast<int>(v)), sugg.get<std::string>()};
    }
    const auto v = score.get<std::int64_t>();
    if (v < 0 || v > 100) return fail(ParseFailureReason::kBadScore);
    return ScorerReply{Score(static_cast<int>(v)), sugg.get<std::string>()};
  } catch (...) {
    return fail(ParseFailureReason::kNoObject);
  }
}

}  // namespace capforge
