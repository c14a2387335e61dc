#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capforge {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Raised when a value violates one of the domain invariants.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke an operation precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class TaskDimension { kCamera, kShort, kBackground, kMainObject, kDetailed };

inline constexpr std::array<TaskDimension, 5> kAllDimensions = {
    TaskDimension::kCamera, TaskDimension::kShort, TaskDimension::kBackground,
    TaskDimension::kMainObject, TaskDimension::kDetailed};

std::string_view to_string(TaskDimension d);
std::optional<TaskDimension> parse_dimension(std::string_view name);

enum class PromptOrigin { kInitial, kRefined, kReflected };
std::string_view to_string(PromptOrigin o);
std::optional<PromptOrigin> parse_prompt_origin(std::string_view name);

enum class Branch { kStop, kRefine, kReflect };
std::string_view to_string(Branch b);
std::optional<Branch> parse_branch(std::string_view name);

enum class CotSource { kRefiner, kReflector };
std::string_view to_string(CotSource s);
std::optional<CotSource> parse_cot_source(std::string_view name);

enum class TerminalReason { kThreshold, kCap, kParseError };
std::string_view to_string(TerminalReason r);
std::optional<TerminalReason> parse_terminal_reason(std::string_view name);

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

struct VideoRef {
  std::string id;
  std::string uri;
  std::optional<double> duration_s;

  void validate() const;
  friend bool operator==(const VideoRef&, const VideoRef&) = default;
};

/// Integer quality score in [0, 100].
class Score {
 public:
  Score() = default;
  explicit Score(int value);

  int value() const { return value_; }

  friend auto operator<=>(const Score&, const Score&) = default;

 private:
  int value_ = 0;
};

struct Prompt {
  std::string text;
  PromptOrigin origin = PromptOrigin::kInitial;

  void validate() const;
  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct ChainOfThought {
  std::string text;
  CotSource produced_by = CotSource::kRefiner;
  friend bool operator==(const ChainOfThought&, const ChainOfThought&) = default;
};

struct TrajectoryStep {
  int t = 0;
  Prompt prompt;
  std::string caption;
  std::optional<Score> score;         // absent iff parse_error
  std::optional<std::string> suggestion;  // absent iff parse_error
  std::optional<Branch> branch_taken;
  std::optional<ChainOfThought> cot;
  bool parse_error = false;
  // Raw scorer reply and failure category, kept for auditing parse failures.
  std::optional<std::string> raw_scorer_reply;
  std::optional<std::string> parse_failure_reason;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
  VideoRef video;
  TaskDimension dimension = TaskDimension::kDetailed;
  std::vector<TrajectoryStep> steps;
  TerminalReason terminal_reason = TerminalReason::kCap;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Checks every structural trajectory invariant against the loop parameters
/// that produced it. Throws InvariantError naming the first violation.
void validate_trajectory(const Trajectory& traj, Score lambda, int t_max);

struct ScoredCaption {
  std::string caption;
  Score score;
  int t = 0;
  friend bool operator==(const ScoredCaption&, const ScoredCaption&) = default;
};

struct PreferenceTuple {
  VideoRef video;
  TaskDimension dimension = TaskDimension::kDetailed;
  ScoredCaption chosen;
  ScoredCaption rejected;
  int delta = 0;

  /// delta == s+ - s-, delta >= 0, distinct step indices.
  void validate() const;
  friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

// ---------------------------------------------------------------------------
// JSON forms. Serialization is canonical: keys appear in a fixed order and
// absent optionals are written as null, so dump(parse(dump(x))) == dump(x).
// ---------------------------------------------------------------------------

json to_json(const VideoRef& v);
VideoRef video_from_json(const json& j);

json to_json(const Prompt& p);
Prompt prompt_from_json(const json& j);

json to_json(const ChainOfThought& c);
ChainOfThought cot_from_json(const json& j);

json to_json(const TrajectoryStep& s);
TrajectoryStep step_from_json(const json& j);

json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);

json to_json(const PreferenceTuple& p);
PreferenceTuple preference_from_json(const json& j);

/// Reads an integer score field, rejecting fractional or out-of-range values.
Score score_from_json(const json& j);

}  // namespace capforge
