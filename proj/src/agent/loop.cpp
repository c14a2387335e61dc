#include "capforge/agent/loop.hpp"

#include <atomic>
#include <thread>

namespace capforge {

Branch decide_branch(Score current, std::optional<Score> previous, Score lambda) {
  if (current >= lambda) return Branch::kStop;
  if (previous && current < *previous) return Branch::kReflect;
  return Branch::kRefine;
}

Trajectory run_trajectory(const VideoRef& video, TaskDimension dim, const RunConfig& cfg,
                          const PromptTemplates& templates, const PrincipleSet& principles,
                          ModelGateway& gateway) {
  video.validate();
  Trajectory traj;
  traj.video = video;
  traj.dimension = dim;

  const auto& principle_text = principles.for_dimension(dim);
  LoopState state;
  state.current_prompt =
      Prompt{render_template(templates.initial, {{"dimension", std::string(to_string(dim))}}), PromptOrigin::kInitial};
  state.current_prompt.validate();

  for (state.t = 0; state.t <= cfg.t_max; ++state.t) {
    TrajectoryStep step;
    step.t = state.t;
    step.prompt = state.current_prompt;
    step.caption = gateway.generate_caption(video, dim, state.current_prompt);

    auto scored = gateway.score_caption(video, dim, step.caption, principles, templates.scorer_instruction);
    if (const auto* failure = std::get_if<ParseFailure>(&scored)) {
      step.parse_error = true;
      step.raw_scorer_reply = failure->raw;
      step.parse_failure_reason = std::string(to_string(failure->reason));
      traj.steps.push_back(std::move(step));
      traj.terminal_reason = TerminalReason::kParseError;
      return traj;
    }
    const auto& reply = std::get<ScorerReply>(scored);
    step.score = reply.score;
    step.suggestion = reply.suggestion;

    const auto branch = decide_branch(reply.score, state.prev_score, cfg.lambda);
    if (branch == Branch::kStop) {
      step.branch_taken = Branch::kStop;
      traj.steps.push_back(std::move(step));
      traj.terminal_reason = TerminalReason::kThreshold;
      return traj;
    }
    if (state.t == cfg.t_max) {
      traj.steps.push_back(std::move(step));
      traj.terminal_reason = TerminalReason::kCap;
      return traj;
    }

    const RefineInput current{state.current_prompt, step.caption, reply.score, reply.suggestion};
    std::pair<Prompt, ChainOfThought> next;
    if (branch == Branch::kRefine) {
      next = gateway.refine_prompt(video, dim, current, templates.refine_instruction,
                                   cfg.refiner_sees_principles ? &principle_text : nullptr);
    } else {
      const PreviousRound previous{*state.prev_prompt, *state.prev_caption, state.prev_cot};
      next = gateway.reflect_prompt(video, dim, current, previous, templates.reflect_instruction);
    }
    step.branch_taken = branch;
    step.cot = next.second;

    state.prev_score = reply.score;
    state.prev_prompt = state.current_prompt;
    state.prev_caption = step.caption;
    state.prev_cot = next.second;
    state.current_prompt = std::move(next.first);
    traj.steps.push_back(std::move(step));
  }
  // Unreachable: the t == t_max round always returns.
  throw std::logic_error("agent loop exceeded t_max");
}

json RunReport::to_json() const {
  json terminal_counts = json::object();
  for (auto r : {TerminalReason::kThreshold, TerminalReason::kCap, TerminalReason::kParseError}) {
    const auto it = terminal.find(r);
    terminal_counts[std::string(capforge::to_string(r))] = it == terminal.end() ? 0 : it->second;
  }
  json errs = json::array();
  for (const auto& e : errors) {
    errs.push_back({{"video_id", e.video_id},
                    {"dimension", capforge::to_string(e.dimension)},
                    {"message", e.message},
                    {"transport", e.transport}});
  }
  return json{{"attempted", attempted},
              {"processed", processed},
              {"already_stored", already_stored},
              {"terminal", terminal_counts},
              {"errors", errs}};
}

std::vector<TrajectoryKey> manifest_keys(const std::vector<ManifestEntry>& videos, const RunConfig& cfg) {
  std::vector<TrajectoryKey> keys;
  for (const auto& e : videos) {
    for (auto d : e.dimensions ? *e.dimensions : cfg.dimensions) keys.emplace_back(e.video.id, d);
  }
  return keys;
}

RunReport run_manifest(const std::vector<ManifestEntry>& videos, const RunConfig& cfg,
                       const PromptTemplates& templates, const PrincipleSet& principles, ModelGateway& gateway,
                       TrajectoryStore& store, const std::function<void(const TrajectoryKey&)>& on_done) {
  struct Job {
    const VideoRef* video;
    TaskDimension dim;
  };
  std::vector<Job> jobs;
  RunReport report;
  for (const auto& e : videos) {
    for (auto d : e.dimensions ? *e.dimensions : cfg.dimensions) {
      ++report.attempted;
      if (store.contains({e.video.id, d})) {
        ++report.already_stored;
      } else {
        jobs.push_back({&e.video, d});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex report_mu;
  const auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& job = jobs[i];
      try {
        const auto traj = run_trajectory(*job.video, job.dim, cfg, templates, principles, gateway);
        store.append(traj);
        std::lock_guard lock(report_mu);
        ++report.processed;
      } catch (const std::exception& e) {
        std::lock_guard lock(report_mu);
        report.errors.push_back(
            {job.video->id, job.dim, e.what(), dynamic_cast<const TransportError*>(&e) != nullptr});
      }
      if (on_done) on_done({job.video->id, job.dim});
    }
  };

  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.parallelism)), jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  // Errors in manifest order regardless of which worker hit them.
  const auto keys = manifest_keys(videos, cfg);
  std::map<TrajectoryKey, std::size_t> rank;
  for (std::size_t i = 0; i < keys.size(); ++i) rank.emplace(keys[i], i);
  std::sort(report.errors.begin(), report.errors.end(), [&](const RunError& a, const RunError& b) {
    return rank[{a.video_id, a.dimension}] < rank[{b.video_id, b.dimension}];
  });

  for (const auto& key : keys) {
    if (const auto r = store.terminal_of(key)) ++report.terminal[*r];
  }
  return report;
}

}  // namespace capforge
