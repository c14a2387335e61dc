#include "capforge/gateway/remote_backend.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

namespace capforge {

EndpointParts split_endpoint(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/?#]+)(/[^?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError("malformed endpoint url '" + url + "'");
  EndpointParts p;
  p.scheme_host_port = m[1].str();
  p.path = m[2].matched ? m[2].str() : "";
  if (p.path.empty() || p.path == "/") p.path = "/v1/chat/completions";
  return p;
}

std::string extract_reply_text(const json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty()) {
    throw TransportError("protocol error: response has no choices", false);
  }
  const auto& choice = body["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content")) {
    throw TransportError("protocol error: choice has no message content", false);
  }
  const auto& content = choice["message"]["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_null()) return {};
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text")) {
        out += part["text"].get<std::string>();
      }
    }
    return out;
  }
  throw TransportError("protocol error: unsupported content type", false);
}

RemoteBackend::RemoteBackend(BackendDescriptor desc)
    : desc_(std::move(desc)), endpoint_(split_endpoint(desc_.endpoint_url)) {
  if (!desc_.auth_env.empty()) {
    if (const char* tok = std::getenv(desc_.auth_env.c_str())) token_ = tok;
  }
}

std::string RemoteBackend::complete(const ChatRequest& req) {
  httplib::Client cli(endpoint_.scheme_host_port);
  const auto secs = static_cast<time_t>(desc_.timeout_s);
  const auto usecs = static_cast<time_t>((desc_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  if (!token_.empty()) cli.set_bearer_token_auth(token_);

  httplib::Headers headers{{kRoleHeader, std::string(to_string(req.role))},
                           {kVideoHeader, req.video.id},
                           {kDimensionHeader, std::string(to_string(req.dimension))}};
  const auto body = to_wire(req, desc_.model_name).dump(-1, ' ', false, json::error_handler_t::replace);
  auto res = cli.Post(endpoint_.path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + desc_.endpoint_url + " failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status != 200) {
    const bool retriable = res->status == 408 || res->status == 429 || res->status >= 500;
    throw TransportError("server returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                         retriable);
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw TransportError("protocol error: response body is not JSON", false);
  return extract_reply_text(parsed);
}

}  // namespace capforge
