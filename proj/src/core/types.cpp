#include "capforge/core/types.hpp"

#include <cmath>
#include <limits>

namespace capforge {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::pair<Enum, std::string_view>, N>& table,
                           std::string_view name) {
  for (const auto& [value, text] : table) {
    if (text == name) return value;
  }
  return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table,
                         Enum value) {
  for (const auto& [v, text] : table) {
    if (v == value) return text;
  }
  return "?";
}

constexpr std::array<std::pair<TaskDimension, std::string_view>, 5> kDimensionNames{{
    {TaskDimension::kCamera, "camera"},
    {TaskDimension::kShort, "short"},
    {TaskDimension::kBackground, "background"},
    {TaskDimension::kMainObject, "main_object"},
    {TaskDimension::kDetailed, "detailed"},
}};

constexpr std::array<std::pair<PromptOrigin, std::string_view>, 3> kOriginNames{{
    {PromptOrigin::kInitial, "initial"},
    {PromptOrigin::kRefined, "refined"},
    {PromptOrigin::kReflected, "reflected"},
}};

constexpr std::array<std::pair<Branch, std::string_view>, 3> kBranchNames{{
    {Branch::kStop, "stop"},
    {Branch::kRefine, "refine"},
    {Branch::kReflect, "reflect"},
}};

constexpr std::array<std::pair<CotSource, std::string_view>, 2> kCotNames{{
    {CotSource::kRefiner, "refiner"},
    {CotSource::kReflector, "reflector"},
}};

constexpr std::array<std::pair<TerminalReason, std::string_view>, 3> kTerminalNames{{
    {TerminalReason::kThreshold, "threshold"},
    {TerminalReason::kCap, "cap"},
    {TerminalReason::kParseError, "parse_error"},
}};

template <typename T, typename Parse>
T parse_enum_field(const json& j, const char* key, Parse parse) {
  const auto& text = j.at(key).get_ref<const std::string&>();
  auto v = parse(text);
  if (!v) throw InvariantError(std::string("unknown value for '") + key + "': " + text);
  return *v;
}

json optional_string(const std::optional<std::string>& s) {
  return s ? json(*s) : json(nullptr);
}

std::optional<std::string> optional_string_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

std::string_view to_string(TaskDimension d) { return name_of(kDimensionNames, d); }
std::optional<TaskDimension> parse_dimension(std::string_view name) {
  return lookup(kDimensionNames, name);
}
std::string_view to_string(PromptOrigin o) { return name_of(kOriginNames, o); }
std::optional<PromptOrigin> parse_prompt_origin(std::string_view name) {
  return lookup(kOriginNames, name);
}
std::string_view to_string(Branch b) { return name_of(kBranchNames, b); }
std::optional<Branch> parse_branch(std::string_view name) { return lookup(kBranchNames, name); }
std::string_view to_string(CotSource s) { return name_of(kCotNames, s); }
std::optional<CotSource> parse_cot_source(std::string_view name) {
  return lookup(kCotNames, name);
}
std::string_view to_string(TerminalReason r) { return name_of(kTerminalNames, r); }
std::optional<TerminalReason> parse_terminal_reason(std::string_view name) {
  return lookup(kTerminalNames, name);
}

void VideoRef::validate() const {
  if (id.empty()) throw InvariantError("video id must be non-empty");
  if (uri.empty()) throw InvariantError("video '" + id + "' has an empty uri");
  if (duration_s && !(std::isfinite(*duration_s) && *duration_s >= 0.0)) {
    throw InvariantError("video '" + id + "' has an invalid duration");
  }
}

Score::Score(int value) : value_(value) {
  if (value < 0 || value > 100) {
    throw InvariantError("score " + std::to_string(value) + " outside [0,100]");
  }
}

void Prompt::validate() const {
  if (text.empty()) throw InvariantError("prompt text must be non-empty");
}

void PreferenceTuple::validate() const {
  video.validate();
  if (delta < 0) throw InvariantError("preference delta must be non-negative");
  if (delta != chosen.score.value() - rejected.score.value()) {
    throw InvariantError("preference delta " + std::to_string(delta) +
                         " does not equal score_chosen - score_rejected for video '" +
                         video.id + "'");
  }
  if (chosen.t == rejected.t) {
    throw InvariantError("chosen and rejected refer to the same step");
  }
}

void validate_trajectory(const Trajectory& traj, Score lambda, int t_max) {
  const auto fail = [&](const std::string& what) {
    throw InvariantError("trajectory (" + traj.video.id + ", " +
                         std::string(to_string(traj.dimension)) + "): " + what);
  };
  traj.video.validate();
  const auto n = static_cast<int>(traj.steps.size());
  if (n < 1) fail("has no steps");
  if (n > t_max + 1) fail("has more than t_max+1 steps");

  for (int i = 0; i < n; ++i) {
    const auto& s = traj.steps[static_cast<std::size_t>(i)];
    const bool last = i == n - 1;
    if (s.t != i) fail("step indices are not consecutive from 0");
    s.prompt.validate();
    if (i == 0 && s.prompt.origin != PromptOrigin::kInitial) fail("step 0 must use the initial prompt");
    if (s.parse_error) {
      if (s.score || s.suggestion) fail("parse-error step carries a score");
      if (!last) fail("parse-error step is not the last step");
      if (s.branch_taken) fail("parse-error step records a branch");
      continue;
    }
    if (!s.score || !s.suggestion) fail("scored step is missing score or suggestion");
    const bool above = *s.score >= lambda;
    if (!last) {
      if (above) fail("non-final step reaches the threshold");
      if (!s.branch_taken || *s.branch_taken == Branch::kStop) fail("non-final step must refine or reflect");
    }
    if (s.branch_taken) {
      const bool needs_cot = *s.branch_taken != Branch::kStop;
      if (needs_cot != s.cot.has_value()) fail("chain-of-thought presence does not match branch");
      if (*s.branch_taken == Branch::kStop && !above) fail("stop branch below threshold");
      if (*s.branch_taken == Branch::kReflect) {
        if (i == 0) fail("reflect at t=0");
        const auto& prev = traj.steps[static_cast<std::size_t>(i - 1)];
        if (!(*s.score < *prev.score)) fail("reflect without a score drop");
        if (s.cot->produced_by != CotSource::kReflector) fail("reflect step cot not from reflector");
      }
      if (*s.branch_taken == Branch::kRefine) {
        if (i > 0 && *s.score < *traj.steps[static_cast<std::size_t>(i - 1)].score) {
          fail("refine after a score drop");
        }
        if (s.cot->produced_by != CotSource::kRefiner) fail("refine step cot not from refiner");
      }
      if (i + 1 < n) {
        const auto next_origin = traj.steps[static_cast<std::size_t>(i + 1)].prompt.origin;
        const auto expected = *s.branch_taken == Branch::kReflect ? PromptOrigin::kReflected
                                                                  : PromptOrigin::kRefined;
        if (next_origin != expected) fail("next prompt origin does not match branch");
      }
    } else if (s.cot) {
      fail("step without branch carries a chain-of-thought");
    }
  }

  const auto& last = traj.steps.back();
  switch (traj.terminal_reason) {
    case TerminalReason::kThreshold:
      if (last.parse_error || !(*last.score >= lambda)) fail("threshold termination below lambda");
      if (last.branch_taken != Branch::kStop) fail("threshold termination without stop branch");
      break;
    case TerminalReason::kCap:
      if (last.parse_error || *last.score >= lambda) fail("cap termination at or above lambda");
      if (n != t_max + 1) fail("cap termination before t_max");
      if (last.branch_taken) fail("cap-terminated final step records a branch");
      break;
    case TerminalReason::kParseError:
      if (!last.parse_error) fail("parse_error termination without a parse-error step");
      break;
  }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

Score score_from_json(const json& j) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw InvariantError("score must be an integer, got " + j.dump());
  }
  const auto v = j.get<long long>();
  if (v < 0 || v > 100) throw InvariantError("score " + std::to_string(v) + " outside [0,100]");
  return Score(static_cast<int>(v));
}

json to_json(const VideoRef& v) {
  return json{{"id", v.id},
              {"uri", v.uri},
              {"duration_s", v.duration_s ? json(*v.duration_s) : json(nullptr)}};
}

VideoRef video_from_json(const json& j) {
  VideoRef v;
  v.id = j.at("id").get<std::string>();
  v.uri = j.at("uri").get<std::string>();
  if (j.contains("duration_s") && !j.at("duration_s").is_null()) {
    v.duration_s = j.at("duration_s").get<double>();
  }
  v.validate();
  return v;
}

json to_json(const Prompt& p) {
  return json{{"text", p.text}, {"origin", to_string(p.origin)}};
}

Prompt prompt_from_json(const json& j) {
  Prompt p;
  p.text = j.at("text").get<std::string>();
  p.origin = parse_enum_field<PromptOrigin>(j, "origin", parse_prompt_origin);
  p.validate();
  return p;
}

json to_json(const ChainOfThought& c) {
  return json{{"text", c.text}, {"produced_by", to_string(c.produced_by)}};
}

ChainOfThought cot_from_json(const json& j) {
  ChainOfThought c;
  c.text = j.at("text").get<std::string>();
  c.produced_by = parse_enum_field<CotSource>(j, "produced_by", parse_cot_source);
  return c;
}

json to_json(const TrajectoryStep& s) {
  return json{
      {"t", s.t},
      {"prompt", to_json(s.prompt)},
      {"caption", s.caption},
      {"score", s.score ? json(s.score->value()) : json(nullptr)},
      {"suggestion", optional_string(s.suggestion)},
      {"branch", s.branch_taken ? json(to_string(*s.branch_taken)) : json(nullptr)},
      {"cot", s.cot ? to_json(*s.cot) : json(nullptr)},
      {"parse_error", s.parse_error},
      {"raw_scorer_reply", optional_string(s.raw_scorer_reply)},
      {"parse_failure_reason", optional_string(s.parse_failure_reason)},
  };
}

TrajectoryStep step_from_json(const json& j) {
  TrajectoryStep s;
  s.t = j.at("t").get<int>();
  s.prompt = prompt_from_json(j.at("prompt"));
  s.caption = j.at("caption").get<std::string>();
  if (!j.at("score").is_null()) s.score = score_from_json(j.at("score"));
  s.suggestion = optional_string_from(j, "suggestion");
  if (!j.at("branch").is_null()) s.branch_taken = parse_enum_field<Branch>(j, "branch", parse_branch);
  if (!j.at("cot").is_null()) s.cot = cot_from_json(j.at("cot"));
  s.parse_error = j.at("parse_error").get<bool>();
  s.raw_scorer_reply = optional_string_from(j, "raw_scorer_reply");
  s.parse_failure_reason = optional_string_from(j, "parse_failure_reason");
  return s;
}

json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  return json{{"video", to_json(t.video)},
              {"dimension", to_string(t.dimension)},
              {"steps", std::move(steps)},
              {"terminal_reason", to_string(t.terminal_reason)}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.video = video_from_json(j.at("video"));
  t.dimension = parse_enum_field<TaskDimension>(j, "dimension", parse_dimension);
  for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
  t.terminal_reason = parse_enum_field<TerminalReason>(j, "terminal_reason", parse_terminal_reason);
  return t;
}

json to_json(const PreferenceTuple& p) {
  return json{
      {"video_id", p.video.id},
      {"uri", p.video.uri},
      {"duration_s", p.video.duration_s ? json(*p.video.duration_s) : json(nullptr)},
      {"dimension", to_string(p.dimension)},
      {"chosen", p.chosen.caption},
      {"rejected", p.rejected.caption},
      {"score_chosen", p.chosen.score.value()},
      {"score_rejected", p.rejected.score.value()},
      {"chosen_t", p.chosen.t},
      {"rejected_t", p.rejected.t},
      {"delta", p.delta},
  };
}

PreferenceTuple preference_from_json(const json& j) {
  PreferenceTuple p;
  p.video.id = j.at("video_id").get<std::string>();
  p.video.uri = j.at("uri").get<std::string>();
  if (j.contains("duration_s") && !j.at("duration_s").is_null()) {
    p.video.duration_s = j.at("duration_s").get<double>();
  }
  p.dimension = parse_enum_field<TaskDimension>(j, "dimension", parse_dimension);
  p.chosen.caption = j.at("chosen").get<std::string>();
  p.rejected.caption = j.at("rejected").get<std::string>();
  p.chosen.score = score_from_json(j.at("score_chosen"));
  p.rejected.score = score_from_json(j.at("score_rejected"));
  p.chosen.t = j.at("chosen_t").get<int>();
  p.rejected.t = j.at("rejected_t").get<int>();
  const auto& d = j.at("delta");
  if (!d.is_number_integer()) throw InvariantError("delta must be an integer");
  p.delta = d.get<int>();
  p.validate();
  return p;
}

}  // namespace capforge
