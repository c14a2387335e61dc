#pragma once

#include <string>

#include "capforge/core/config.hpp"
#include "capforge/gateway/backend.hpp"

namespace capforge {

// Headers carrying call metadata alongside the chat-completions body. Servers
// that do not know them ignore them; the test stub server routes on them.
inline constexpr const char* kRoleHeader = "X-Capforge-Role";
inline constexpr const char* kVideoHeader = "X-Capforge-Video";
inline constexpr const char* kDimensionHeader = "X-Capforge-Dimension";

struct EndpointParts {
  std::string scheme_host_port;  // e.g. http://127.0.0.1:8000
  std::string path;              // e.g. /v1/chat/completions
};

/// Splits an endpoint URL. A URL without a path targets /v1/chat/completions.
EndpointParts split_endpoint(const std::string& url);

/// Text of choices[0].message.content from a chat-completions response body.
/// Array-form content has its text parts concatenated.
std::string extract_reply_text(const json& body);

/// HTTP client for an OpenAI-compatible chat-completions server. One attempt
/// per complete() call; retries belong to ModelGateway.
class RemoteBackend : public ModelBackend {
 public:
  explicit RemoteBackend(BackendDescriptor desc);

  std::string complete(const ChatRequest& req) override;

 private:
  BackendDescriptor desc_;
  EndpointParts endpoint_;
  std::string token_;
};

}  // namespace capforge
