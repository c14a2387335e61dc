#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capforge/agent/store.hpp"
#include "capforge/core/config.hpp"
#include "capforge/gateway/gateway.hpp"

namespace capforge {

/// Three-way prompt update decision. With no previous score (t = 0) the
/// result is never reflect; a tie with the previous score refines.
Branch decide_branch(Score current, std::optional<Score> previous, Score lambda);

/// Carried between iterations of one trajectory.
struct LoopState {
  int t = 0;
  std::optional<Score> prev_score;
  std::optional<Prompt> prev_prompt;
  std::optional<std::string> prev_caption;
  std::optional<ChainOfThought> prev_cot;
  Prompt current_prompt;
};

/// Runs generate -> score -> (stop | refine | reflect) for t = 0..t_max.
/// Parse failures end the trajectory as data; gateway errors propagate.
Trajectory run_trajectory(const VideoRef& video, TaskDimension dim, const RunConfig& cfg,
                          const PromptTemplates& templates, const PrincipleSet& principles,
                          ModelGateway& gateway);

struct ManifestEntry {
  VideoRef video;
  std::optional<std::vector<TaskDimension>> dimensions;  // overrides RunConfig.dimensions
};

struct RunError {
  std::string video_id;
  TaskDimension dimension;
  std::string message;
  bool transport = false;
};

struct RunReport {
  std::size_t attempted = 0;       // |keys| in the manifest
  std::size_t processed = 0;       // newly run in this invocation
  std::size_t already_stored = 0;  // skipped on resume
  std::map<TerminalReason, std::size_t> terminal;  // over all stored keys of the manifest
  std::vector<RunError> errors;

  json to_json() const;
};

/// (video, dimension) keys of a manifest, in manifest order.
std::vector<TrajectoryKey> manifest_keys(const std::vector<ManifestEntry>& videos, const RunConfig& cfg);

/// One trajectory per key, skipping keys already in the store. Keys run
/// concurrently up to cfg.parallelism; per-key failures are collected.
/// `on_done` (optional) is called after each key finishes, from worker threads.
RunReport run_manifest(const std::vector<ManifestEntry>& videos, const RunConfig& cfg,
                       const PromptTemplates& templates, const PrincipleSet& principles, ModelGateway& gateway,
                       TrajectoryStore& store, const std::function<void(const TrajectoryKey&)>& on_done = {});

}  // namespace capforge
