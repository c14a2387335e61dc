#include "capforge/gateway/backend.hpp"

#include "capforge/core/digest.hpp"

namespace capforge {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kCaptioner: return "captioner";
    case Role::kScorer: return "scorer";
    case Role::kRefiner: return "refiner";
    case Role::kReflector: return "reflector";
  }
  return "captioner";
}

std::optional<Role> parse_role(std::string_view name) {
  for (auto r : {Role::kCaptioner, Role::kScorer, Role::kRefiner, Role::kReflector}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

json to_wire(const ChatRequest& req, const std::string& model_name) {
  json content = json::array();
  if (req.attach_video) {
    content.push_back({{"type", "video_url"}, {"video_url", {{"url", req.video.uri}}}});
  }
  content.push_back({{"type", "text"}, {"text", req.text}});
  return json{{"model", model_name},
              {"messages", json::array({json{{"role", "user"}, {"content", std::move(content)}}})},
              {"temperature", req.temperature}};
}

std::string request_digest(const ChatRequest& req, const std::string& model_name) {
  return sha256_hex(std::string(to_string(req.role)) + "\n" + req.video.id + "\n" +
                    std::string(to_string(req.dimension)) + "\n" + to_wire(req, model_name).dump(-1, ' ', false, json::error_handler_t::replace));
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Content of <tag>...</tag>; nullopt when the tag pair is absent.
std::optional<std::pair<std::size_t, std::size_t>> tag_span(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto b = text.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  const auto e = text.find(close, b + open.size());
  if (e == std::string_view::npos) return std::nullopt;
  return std::make_pair(b, e + close.size());
}

std::string tag_content(std::string_view text, std::pair<std::size_t, std::size_t> span, std::string_view tag) {
  const auto open_len = tag.size() + 2;
  const auto close_len = tag.size() + 3;
  return trim(text.substr(span.first + open_len, span.second - span.first - open_len - close_len));
}

}  // namespace

std::string format_rewrite_reply(const Rewrite& r) {
  return "<reasoning>\n" + r.cot + "\n</reasoning>\n<prompt>\n" + r.prompt + "\n</prompt>";
}

Rewrite parse_rewrite_reply(std::string_view raw) {
  const auto prompt_span = tag_span(raw, "prompt");
  if (!prompt_span) throw MalformedReply("rewrite reply has no <prompt> section");
  Rewrite r;
  r.prompt = tag_content(raw, *prompt_span, "prompt");
  if (r.prompt.empty()) throw MalformedReply("rewrite reply has an empty <prompt> section");
  if (const auto cot_span = tag_span(raw, "reasoning")) {
    r.cot = tag_content(raw, *cot_span, "reasoning");
  } else {
    std::string rest(raw.substr(0, prompt_span->first));
    rest += raw.substr(prompt_span->second);
    r.cot = trim(rest);
  }
  return r;
}

}  // namespace capforge
