#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capforge/gateway/backend.hpp"

namespace capforge {

/// Scripted replies for one (video, dimension). Lists are consumed in call
/// order. An absent caption/refinement/reflection list means those replies
/// are synthesized from the call counter; an explicit list that runs out is
/// an error.
struct Script {
  std::optional<std::vector<std::string>> captions;
  std::vector<std::string> scorer_replies;  // raw reply text
  std::optional<std::vector<Rewrite>> refinements;
  std::optional<std::vector<Rewrite>> reflections;
};

/// Raw scorer reply text for a well-formed (score, suggestion).
std::string scorer_reply_text(int score, const std::string& suggestion);

/// Seeded random-walk scorer used for keys without an explicit script.
struct ScoreWalk {
  std::uint64_t seed = 0;
  int length = 8;
  int start_min = 40;
  int start_max = 95;
  int step_min = -15;
  int step_max = 20;
  double parse_error_rate = 0.0;  // chance that any one reply is malformed

  /// Script for one key; the same (seed, video, dimension) always yields the same script.
  Script script_for(const std::string& video_id, TaskDimension d) const;
};

struct ScriptedBehavior {
  std::map<std::pair<std::string, TaskDimension>, Script> scripts;
  std::optional<ScoreWalk> generator;

  static ScriptedBehavior from_json(const json& j);
  static ScriptedBehavior from_file(const std::string& path);
};

/// In-process backend replaying a ScriptedBehavior. Thread-safe.
class ScriptedBackend : public ModelBackend {
 public:
  /// With `record_requests`, every request is kept for requests().
  explicit ScriptedBackend(ScriptedBehavior behavior, bool record_requests = false);

  std::string complete(const ChatRequest& req) override;

  /// Every request seen so far, in arrival order (empty unless recording).
  std::vector<ChatRequest> requests() const;

 private:
  struct Cursor {
    Script script;
    std::size_t captions = 0;
    std::size_t scores = 0;
    std::size_t refinements = 0;
    std::size_t reflections = 0;
  };

  Cursor& cursor_for(const ChatRequest& req);

  ScriptedBehavior behavior_;
  std::map<std::pair<std::string, TaskDimension>, Cursor> cursors_;
  bool record_requests_;
  std::vector<ChatRequest> log_;
  mutable std::mutex mu_;
};

}  // namespace capforge
