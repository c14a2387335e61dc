#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "capforge/core/types.hpp"

namespace capforge {

/// The four uses of the one backbone model; they differ only in instruction text.
enum class Role { kCaptioner, kScorer, kRefiner, kReflector };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view name);

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network or protocol failure talking to the model server.
class TransportError : public GatewayError {
 public:
  TransportError(const std::string& what, bool retriable) : GatewayError(what), retriable_(retriable) {}
  bool retriable() const { return retriable_; }

 private:
  bool retriable_;
};

/// The scripted backend ran out of entries for a (video, dimension, role).
class ScriptExhausted : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// A reply arrived but lacks a required part (empty caption, no prompt section).
class MalformedReply : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// One model call. `text` is the fully rendered instruction; the video is
/// attached by reference for the captioner and scorer roles.
struct ChatRequest {
  Role role = Role::kCaptioner;
  VideoRef video;
  TaskDimension dimension = TaskDimension::kDetailed;
  std::string text;
  bool attach_video = true;
  double temperature = 0.0;
};

/// Chat-completions request body for the given model name.
json to_wire(const ChatRequest& req, const std::string& model_name);

/// Stable digest of a request: sha256 over role, video id, dimension and wire body.
std::string request_digest(const ChatRequest& req, const std::string& model_name);

/// A refiner or reflector answer: the next prompt and the reasoning behind it.
struct Rewrite {
  std::string prompt;
  std::string cot;
};

/// Reply layout the refine/reflect templates ask for:
///   <reasoning>...</reasoning>
///   <prompt>...</prompt>
std::string format_rewrite_reply(const Rewrite& r);

/// Throws MalformedReply when the <prompt> section is missing or blank. Text
/// outside the prompt section is taken as the reasoning when no
/// <reasoning> section is present.
Rewrite parse_rewrite_reply(std::string_view raw);

/// Something that turns a request into raw reply text.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
};

}  // namespace capforge
