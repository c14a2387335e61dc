#include "capforge/cli/commands.hpp"

#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include "capforge/agent/loop.hpp"
#include "capforge/agent/store.hpp"
#include "capforge/cli/ledger.hpp"
#include "capforge/cli/manifest_io.hpp"
#include "capforge/core/digest.hpp"
#include "capforge/core/rng.hpp"
#include "capforge/dataset/forge.hpp"
#include "capforge/dpo/manifest.hpp"
#include "capforge/dpo/train.hpp"
#include "capforge/gateway/remote_backend.hpp"
#include "capforge/gateway/scripted_backend.hpp"

namespace fs = std::filesystem;

namespace capforge {

namespace {

constexpr const char* kRunConfigFile = "run_config.json";
constexpr const char* kAuditFile = "audit.jsonl";

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const CorruptRecordError& e) {
    err << "corrupt record " << e.key() << ": " << e.what() << '\n';
    return kExitDataCorruption;
  } catch (const LedgerError& e) {
    err << "ledger error: " << e.what() << '\n';
    return kExitDataCorruption;
  } catch (const TrainingDiverged& e) {
    err << "training diverged: " << e.what() << '\n' << e.state().dump(2) << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(p.string() + " is not valid JSON");
  return j;
}

std::string pretty(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

std::optional<RunLedger> ledger_near(const fs::path& dir) { return RunLedger::load(dir / RunLedger::kFileName); }

std::unique_ptr<ModelBackend> make_backend(const PipelineConfig& cfg, std::string& script_digest) {
  const auto& b = cfg.run.backend;
  if (b.kind == BackendKind::kRemote) return std::make_unique<RemoteBackend>(b);
  ScriptedBehavior behavior;
  if (b.script_path.empty()) {
    behavior.generator = ScoreWalk{};
    behavior.generator->seed = cfg.run.seed;
  } else {
    const fs::path script = fs::path(cfg.base_dir) / b.script_path;
    if (!fs::is_regular_file(script)) throw ConfigError("backend script not found: " + script.string());
    try {
      behavior = ScriptedBehavior::from_file(script.string());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("backend script " + script.string() + ": " + e.what());
    }
    script_digest = sha256_file(script);
  }
  return std::make_unique<ScriptedBackend>(std::move(behavior));
}

}  // namespace

const char* exit_code_help() {
  return "Exit codes:\n"
         "  0  success\n"
         "  1  run finished with per-key errors, or training diverged\n"
         "  2  usage error (bad arguments, missing input files)\n"
         "  3  config error (config, templates, principles or manifest invalid)\n"
         "  4  transport error (backend unreachable or failing after retries)\n"
         "  5  data corruption (corrupt record, checksum or ledger mismatch)\n";
}

// ---------------------------------------------------------------------------

int cmd_generate(const GenerateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(opts.config, "config file");
    require_file(opts.manifest, "manifest file");

    auto doc = read_json_file(opts.config);
    if (!doc.is_object()) throw ConfigError("config document must be an object");
    auto& run = doc["run"];
    if (run.is_null()) run = json::object();
    if (opts.lambda) run["lambda"] = *opts.lambda;
    if (opts.t_max) run["t_max"] = *opts.t_max;
    if (opts.parallelism) run["parallelism"] = *opts.parallelism;
    if (opts.seed) run["seed"] = *opts.seed;
    if (opts.endpoint) {
      auto& backend = run["backend"];
      if (!backend.is_object()) backend = json::object();
      backend["kind"] = "remote";
      backend["endpoint_url"] = *opts.endpoint;
      backend.erase("script_path");
    }
    auto cfg = load_pipeline_config(doc);
    cfg.base_dir = fs::absolute(opts.config).parent_path().string();
    const auto videos = load_manifest(opts.manifest);
    std::string script_digest;
    auto backend = make_backend(cfg, script_digest);

    const auto digest = config_digest(cfg);
    const auto manifest_digest = sha256_file(opts.manifest);
    const auto run_id = sha256_hex(digest + "\n" + manifest_digest + "\n" + script_digest).substr(0, 16);
    const auto ledger_path = opts.out_dir / RunLedger::kFileName;
    auto ledger = RunLedger::load(ledger_path);
    if (ledger && ledger->config_digest() != digest) {
      throw ConfigError("output directory " + opts.out_dir.string() +
                        " holds a run with a different configuration; use a fresh directory");
    }
    if (!ledger) ledger.emplace(run_id, digest);

    fs::create_directories(opts.out_dir);
    write_file_atomic(opts.out_dir / kRunConfigFile, pretty(to_json(cfg)));
    TrajectoryStore store(opts.out_dir);
    AuditLog audit(opts.out_dir / kAuditFile);
    ModelGateway gateway(*backend, GatewayOptions::from(cfg.run), &audit);
    const auto report = run_manifest(videos, cfg.run, cfg.templates, cfg.principles, gateway, store);
    store.compact(manifest_keys(videos, cfg.run));

    auto summary = report.to_json();
    summary["run_id"] = ledger->run_id();
    out << pretty(summary);

    if (!report.errors.empty()) {
      const bool transport = std::any_of(report.errors.begin(), report.errors.end(),
                                         [](const RunError& e) { return e.transport; });
      err << report.errors.size() << " key(s) failed; rerun to resume\n";
      return transport ? kExitTransport : kExitFailure;
    }
    json details{{"manifest_sha256", manifest_digest},
                 {"attempted", report.attempted},
                 {"terminal", summary["terminal"]}};
    if (!script_digest.empty()) details["script_sha256"] = script_digest;
    ledger->record("generate", manifest_digest, sha256_file(store.path()), details);
    ledger->save(ledger_path);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_build(const BuildOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto store_file = opts.store_dir / TrajectoryStore::kFileName;
    require_file(store_file, "trajectory store");
    const auto store_digest = sha256_file(store_file);

    std::optional<RunConfig> run;
    if (fs::is_regular_file(opts.store_dir / kRunConfigFile)) {
      run = load_pipeline_config(read_json_file(opts.store_dir / kRunConfigFile)).run;
    } else {
      err << "note: no " << kRunConfigFile << " in store; trajectory invariants not checked\n";
    }

    const auto trajectories = TrajectoryStore::read_all(opts.store_dir);
    if (run) {
      for (const auto& t : trajectories) {
        try {
          validate_trajectory(t, run->lambda, run->t_max);
        } catch (const InvariantError& e) {
          throw CorruptRecordError("(" + t.video.id + ", " + std::string(to_string(t.dimension)) + ")", 0,
                                   e.what());
        }
      }
    }

    const auto built = build_dataset(trajectories);
    write_preferences(opts.out_path, built.tuples);
    const json report{{"filter", to_json(built.filter)}, {"stats", to_json(built.stats)}};
    write_file_atomic(stats_sidecar_path(opts.out_path), pretty(report));
    out << pretty(report);

    if (auto ledger = ledger_near(opts.store_dir)) {
      ledger->record("build", store_digest, sha256_file(opts.out_path),
                     {{"dataset", opts.out_path.filename().string()},
                      {"filter", to_json(built.filter)},
                      {"tuple_count", built.stats.tuple_count},
                      {"dropped_zero_gap", built.stats.dropped_zero_gap}});
      ledger->save(opts.store_dir / RunLedger::kFileName);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Ordering> parse_ordering_list(const std::string& text) {
  std::vector<Ordering> out;
  std::set<Ordering> seen;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const auto o = parse_ordering(item);
      if (seen.insert(o).second) out.push_back(o);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--ordering needs at least one of curriculum, shuffled, anti");
  return out;
}

}  // namespace

int cmd_train_toy(const TrainToyOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto orderings = parse_ordering_list(opts.orderings);
    require_file(opts.dataset, "dataset");
    TrainSchedule schedule;
    if (opts.config) {
      require_file(*opts.config, "config file");
      const auto doc = read_json_file(*opts.config);
      if (doc.contains("train")) schedule = schedule_from_json(doc["train"]);
    }
    if (opts.epochs) schedule.epochs = *opts.epochs;
    if (opts.batch_size) schedule.batch_size = *opts.batch_size;
    if (opts.lr0) schedule.lr0 = *opts.lr0;
    if (opts.warmup_frac) schedule.warmup_frac = *opts.warmup_frac;
    if (opts.beta) schedule.beta = *opts.beta;
    if (opts.seed) schedule.seed = *opts.seed;
    try {
      schedule.validate();
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    auto toy = opts.toy;
    toy.seed = schedule.seed;
    try {
      toy.validate();
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }

    const auto tuples = read_preferences(opts.dataset);
    const auto dataset_digest = sha256_file(opts.dataset);
    const auto data = tokenize_toy(tuples, toy);
    const auto init = ToyPolicy::random(toy.vocab, toy.contexts, opts.init_scale, derive_seed(schedule.seed, "init"));

    fs::create_directories(opts.out_dir);
    json arms = json::array();
    std::map<Ordering, double> final_acc;
    for (auto o : orderings) {
      const auto result = train(init, init, data, schedule, o);
      const auto trace_name = "trace_" + std::string(to_string(o)) + ".csv";
      write_file_atomic(opts.out_dir / trace_name, trace_csv(result.trace));
      final_acc[o] = result.final_pref_acc;
      arms.push_back({{"ordering", std::string(to_string(o))},
                      {"trace", trace_name},
                      {"steps", result.trace.size()},
                      {"initial_pref_acc", result.initial_pref_acc},
                      {"final_pref_acc", result.final_pref_acc},
                      {"final_loss", result.final_loss}});
    }
    json summary{{"dataset_sha256", dataset_digest},
                 {"pairs", data.size()},
                 {"schedule", to_json(schedule)},
                 {"toy", to_json(toy)},
                 {"init_scale", opts.init_scale},
                 {"arms", arms}};
    if (final_acc.contains(Ordering::kCurriculum) && final_acc.contains(Ordering::kShuffled)) {
      summary["curriculum_minus_shuffled"] = final_acc[Ordering::kCurriculum] - final_acc[Ordering::kShuffled];
    }
    const auto text = pretty(summary);
    write_file_atomic(opts.out_dir / "summary.json", text);
    out << text;

    if (auto ledger = ledger_near(opts.dataset.parent_path())) {
      ledger->record("train", dataset_digest, sha256_hex(text), {{"arms", arms}});
      ledger->save(opts.dataset.parent_path() / RunLedger::kFileName);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_export(const ExportOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ManifestOptions m;
    try {
      m.ordering = parse_ordering(opts.ordering);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (opts.batch_size < 1) throw UsageError("--batch-size must be >= 1");
    require_file(opts.dataset, "dataset");
    m.batch_size = opts.batch_size;
    m.seed = opts.seed;
    m.reapply_order_each_epoch = opts.reapply_order_each_epoch;
    export_training_manifest(opts.dataset, opts.out_path, m);
    const auto dataset_digest = sha256_file(opts.dataset);
    const auto manifest_digest = sha256_file(opts.out_path);
    out << pretty({{"manifest", opts.out_path.filename().string()},
                   {"manifest_sha256", manifest_digest},
                   {"source_sha256", dataset_digest},
                   {"ordering", std::string(to_string(m.ordering))}});
    if (auto ledger = ledger_near(opts.dataset.parent_path())) {
      ledger->record("export", dataset_digest, manifest_digest, {{"ordering", std::string(to_string(m.ordering))}});
      ledger->save(opts.dataset.parent_path() / RunLedger::kFileName);
    }
    return kExitOk;
  });
}

int cmd_stats(const fs::path& dataset, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(dataset, "dataset");
    const auto tuples = read_preferences(dataset);
    std::size_t dropped = 0;
    const auto sidecar = stats_sidecar_path(dataset);
    if (fs::is_regular_file(sidecar)) {
      const auto j = read_json_file(sidecar);
      if (j.contains("stats")) dropped = j["stats"].value("dropped_zero_gap", std::size_t{0});
    }
    out << pretty(to_json(compute_stats(tuples, dropped)));
    return kExitOk;
  });
}

int cmd_validate(const ValidateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opts.manifest && !opts.dataset && !opts.store) {
      throw UsageError("validate needs --manifest (with --dataset), --dataset or --store");
    }
    if (opts.manifest) {
      if (!opts.dataset) throw UsageError("--manifest requires --dataset");
      require_file(*opts.manifest, "training manifest");
      require_file(*opts.dataset, "dataset");
      const auto check = validate_training_manifest(*opts.manifest, *opts.dataset);
      if (!check.ok) {
        err << "manifest invalid: " << check.message << '\n';
        return kExitDataCorruption;
      }
      out << "manifest " << check.message << '\n';
    } else if (opts.dataset) {
      require_file(*opts.dataset, "dataset");
      out << "dataset ok: " << read_preferences(*opts.dataset).size() << " tuples\n";
    }
    if (opts.store) {
      require_file(*opts.store / TrajectoryStore::kFileName, "trajectory store");
      const auto run = load_pipeline_config(read_json_file(*opts.store / kRunConfigFile)).run;
      const auto trajectories = TrajectoryStore::read_all(*opts.store);
      for (const auto& t : trajectories) {
        try {
          validate_trajectory(t, run.lambda, run.t_max);
        } catch (const InvariantError& e) {
          throw CorruptRecordError("(" + t.video.id + ", " + std::string(to_string(t.dimension)) + ")", 0,
                                   e.what());
        }
      }
      out << "store ok: " << trajectories.size() << " trajectories\n";
    }
    return kExitOk;
  });
}

}  // namespace capforge
