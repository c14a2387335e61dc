#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "capforge/agent/loop.hpp"
#include "capforge/core/config.hpp"
#include "capforge/dpo/toy_data.hpp"
#include "capforge/gateway/scripted_backend.hpp"

namespace capforge::testing {

std::filesystem::path source_path(const std::string& relative);

/// config/capforge.json from the source tree.
PipelineConfig example_config();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

/// A score entry: an integer becomes a well-formed reply, a string is sent raw.
using ScriptedScore = std::variant<int, std::string>;
Script scores_script(const std::vector<ScriptedScore>& scores);

VideoRef video(const std::string& id);

// ---------------------------------------------------------------------------
// Paper-scale store: 4,008 videos x 5 dimensions. Exactly 1,078 trajectories
// stop at t = 0 on the threshold, 76 end in a parse error, and the remaining
// 18,886 have at least two scored steps and a non-zero score gap.

struct PaperScaleCounts {
  static constexpr std::size_t kVideos = 4008;
  static constexpr std::size_t kTrajectories = 20040;
  static constexpr std::size_t kSingleStep = 1078;
  static constexpr std::size_t kParseError = 76;
  static constexpr std::size_t kRetained = 18886;
};

std::vector<ManifestEntry> paper_scale_manifest();
ScriptedBehavior paper_scale_behavior(const std::vector<ManifestEntry>& manifest);

/// Runs the agent loop over the paper-scale manifest into `dir` and writes
/// run_config.json next to the store. Returns the run report.
RunReport write_paper_scale_store(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Toy curriculum fixture: 200 preference tuples with gaps drawn uniformly from
// [1, 100] and the generator/schedule parameters used for the ordering arms.

std::vector<PreferenceTuple> toy_fixture_tuples();
ToyDataParams toy_fixture_params();
TrainSchedule toy_fixture_schedule();
constexpr double kToyFixtureInitScale = 0.5;

/// Recorded from the seed-0 run of every ordering arm (accuracy = k / 200).
struct ToyFixtureOracle {
  static constexpr double kInitialAcc = 111.0 / 200.0;
  static constexpr double kCurriculumAcc = 170.0 / 200.0;
  static constexpr double kShuffledAcc = 169.0 / 200.0;
  static constexpr double kAntiAcc = 170.0 / 200.0;
};

/// Seeded random-walk scorer used for the trajectory-length sweep.
ScoreWalk sweep_walk();

}  // namespace capforge::testing

namespace capforge::testing {

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, kFdFloor) over
/// every logit, for one random policy/reference/pair drawn from `seed`.
/// Numeric gradients use central differences with step h.
constexpr double kFdFloor = 1e-4;
double max_fd_relative_error(std::uint64_t seed, double h = 1e-5);

}  // namespace capforge::testing

namespace capforge::testing {

/// Exit codes of one generate -> build -> train-toy -> export pass over the
/// example config and video manifest, written under `dir`.
struct PipelineRun {
  int generate = -1;
  int build = -1;
  int train = -1;
  int exported = -1;
  bool ok() const { return generate == 0 && build == 0 && train == 0 && exported == 0; }
};
PipelineRun run_fixture_pipeline(const std::filesystem::path& dir);

/// Artifacts of a pipeline run compared for determinism (relative to `dir`).
/// The audit log is left out: it records wall-clock latencies.
std::vector<std::string> pipeline_artifacts();

}  // namespace capforge::testing
