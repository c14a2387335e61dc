#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <algorithm>
#include <cmath>

#include "capforge/cli/commands.hpp"
#include "capforge/core/rng.hpp"
#include "capforge/dataset/forge.hpp"
#include "capforge/dpo/curriculum.hpp"
#include "capforge/dpo/loss.hpp"
#include "capforge/dpo/policy.hpp"

#ifndef CAPFORGE_SOURCE_DIR
#error "CAPFORGE_SOURCE_DIR must be defined"
#endif

namespace fs = std::filesystem;

namespace capforge::testing {

fs::path source_path(const std::string& relative) { return fs::path(CAPFORGE_SOURCE_DIR) / relative; }

PipelineConfig example_config() { return load_pipeline_config_file(source_path("config/capforge.json").string()); }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("capforge-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

Script scores_script(const std::vector<ScriptedScore>& scores) {
  Script s;
  for (const auto& e : scores) {
    if (const auto* n = std::get_if<int>(&e)) {
      s.scorer_replies.push_back(scorer_reply_text(*n, "describe more"));
    } else {
      s.scorer_replies.push_back(std::get<std::string>(e));
    }
  }
  return s;
}

VideoRef video(const std::string& id) { return VideoRef{id, "file:///videos/" + id + ".mp4", std::nullopt}; }

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> paper_scale_manifest() {
  std::vector<ManifestEntry> out;
  out.reserve(PaperScaleCounts::kVideos);
  for (std::size_t i = 0; i < PaperScaleCounts::kVideos; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "vid%05zu", i);
    out.push_back({video(id), std::nullopt});
  }
  return out;
}

ScriptedBehavior paper_scale_behavior(const std::vector<ManifestEntry>& manifest) {
  // Keys are bucketed by a seeded permutation: the first 76 positions end in a
  // parse error, the next 1,078 stop at t = 0, the rest run >= 2 rounds.
  std::vector<std::pair<std::string, TaskDimension>> keys;
  for (const auto& e : manifest) {
    for (auto d : kAllDimensions) keys.emplace_back(e.video.id, d);
  }
  const auto perm = shuffled_order(keys.size(), derive_seed(7, "paper-scale/buckets"));

  ScriptedBehavior b;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    const auto& key = keys[perm[pos]];
    std::mt19937_64 rng(derive_seed(7, key.first + "/" + std::string(to_string(key.second))));
    std::vector<ScriptedScore> scores;
    if (pos < PaperScaleCounts::kParseError) {
      if (pos % 2 == 0) {
        scores = {std::string("The caption is accurate. Score: high")};
      } else {
        scores = {uniform_int(rng, 20, 80), std::string("{\"score\": \"ninety\", \"suggestions\": \"\"}")};
      }
    } else if (pos < PaperScaleCounts::kParseError + PaperScaleCounts::kSingleStep) {
      scores = {uniform_int(rng, 90, 100)};
    } else {
      int s = uniform_int(rng, 20, 85);
      scores.push_back(s);
      for (int t = 1; t <= 4; ++t) {
        int next = std::clamp(s + uniform_int(rng, -15, 20), 0, 100);
        if (t == 1 && next == s) next = s + 1;  // guarantees a non-zero gap
        scores.push_back(next);
        s = next;
        if (s >= 90) break;
      }
    }
    b.scripts.emplace(key, scores_script(scores));
  }
  return b;
}

RunReport write_paper_scale_store(const fs::path& dir) {
  auto cfg = example_config();
  cfg.run.parallelism = 1;
  const auto manifest = paper_scale_manifest();
  ScriptedBackend backend(paper_scale_behavior(manifest));
  ModelGateway gateway(backend, GatewayOptions::from(cfg.run));
  fs::create_directories(dir);
  TrajectoryStore store(dir);
  auto report = run_manifest(manifest, cfg.run, cfg.templates, cfg.principles, gateway, store);
  store.compact(manifest_keys(manifest, cfg.run));
  write_file_atomic(dir / "run_config.json", to_json(cfg).dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------

std::vector<PreferenceTuple> toy_fixture_tuples() {
  std::mt19937_64 rng(derive_seed(0, "toy-fixture"));
  std::vector<PreferenceTuple> out;
  for (int i = 0; i < 200; ++i) {
    const int delta = uniform_int(rng, 1, 100);
    const int lo = (100 - delta) / 2;
    char id[16];
    std::snprintf(id, sizeof id, "toy%03d", i);
    PreferenceTuple p{video(id),
                      kAllDimensions[static_cast<std::size_t>(i) % kAllDimensions.size()],
                      {std::string("better caption ") + id, Score(lo + delta), 1},
                      {std::string("worse caption ") + id, Score(lo), 0},
                      delta};
    out.push_back(std::move(p));
  }
  return out;
}

ToyDataParams toy_fixture_params() {
  ToyDataParams p;
  p.vocab = 16;
  p.contexts = 8;
  p.seq_len = 6;
  p.label_noise = 0.3;
  p.seed = 0;
  return p;
}

TrainSchedule toy_fixture_schedule() {
  TrainSchedule s;
  s.epochs = 3;
  s.batch_size = 16;
  s.lr0 = 2.0;
  s.warmup_frac = 0.1;
  s.beta = 1.0;
  s.seed = 0;
  return s;
}

ScoreWalk sweep_walk() {
  ScoreWalk w;
  w.seed = 11;
  w.length = 8;
  w.start_min = 30;
  w.start_max = 85;
  w.step_min = -15;
  w.step_max = 20;
  w.parse_error_rate = 0.02;
  return w;
}

}  // namespace capforge::testing

namespace capforge::testing {

double max_fd_relative_error(std::uint64_t seed, double h) {
  std::mt19937_64 rng(derive_seed(seed, "fd"));
  const int vocab = uniform_int(rng, 3, 12);
  const int contexts = uniform_int(rng, 1, 4);
  const auto draw_seq = [&](int lo, int hi, int n_max) {
    std::vector<int> s(static_cast<std::size_t>(uniform_int(rng, 1, n_max)));
    for (auto& x : s) x = uniform_int(rng, lo, hi);
    return s;
  };
  const auto context = draw_seq(0, contexts - 1, 4);
  const auto chosen = draw_seq(0, vocab - 1, 6);
  const auto rejected = draw_seq(0, vocab - 1, 6);
  const double beta = 0.05 + 2.0 * uniform_unit(rng);
  auto policy = ToyPolicy::random(vocab, contexts, 2.0, derive_seed(seed, "fd/policy"));
  const auto ref = ToyPolicy::random(vocab, contexts, 2.0, derive_seed(seed, "fd/ref"));

  const auto analytic = dpo_grad(policy, ref, context, chosen, rejected, beta);
  const auto loss_at = [&](const ToyPolicy& p) { return dpo_loss(dpo_item(p, ref, context, chosen, rejected), beta); };
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double saved = policy.logits()[i];
    policy.logits()[i] = saved + h;
    const double up = loss_at(policy);
    policy.logits()[i] = saved - h;
    const double down = loss_at(policy);
    policy.logits()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kFdFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace capforge::testing

namespace capforge::testing {

PipelineRun run_fixture_pipeline(const fs::path& dir) {
  std::ostringstream out, err;
  PipelineRun r;
  GenerateOptions gen;
  gen.config = source_path("config/capforge.json");
  gen.manifest = source_path("config/videos.jsonl");
  gen.out_dir = dir / "run";
  r.generate = cmd_generate(gen, out, err);

  BuildOptions build{dir / "run", dir / "run" / "preferences.jsonl"};
  r.build = cmd_build(build, out, err);

  TrainToyOptions train;
  train.dataset = dir / "run" / "preferences.jsonl";
  train.out_dir = dir / "run" / "train";
  train.config = source_path("config/capforge.json");
  r.train = cmd_train_toy(train, out, err);

  ExportOptions exp;
  exp.dataset = dir / "run" / "preferences.jsonl";
  exp.out_path = dir / "run" / "manifest.jsonl";
  r.exported = cmd_export(exp, out, err);
  return r;
}

std::vector<std::string> pipeline_artifacts() {
  return {"run/trajectories.jsonl",          "run/run_config.json",         "run/ledger.json",
          "run/preferences.jsonl",           "run/preferences.stats.json",  "run/train/trace_curriculum.csv",
          "run/train/trace_shuffled.csv",    "run/train/summary.json",      "run/manifest.jsonl"};
}

}  // namespace capforge::testing
