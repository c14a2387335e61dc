#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "capforge/core/types.hpp"

namespace capforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackendKind { kRemote, kScripted };

struct RoleTemperatures {
  double captioner = 0.0;
  double scorer = 0.0;
  double refiner = 0.0;
  double reflector = 0.0;
};

struct BackendDescriptor {
  BackendKind kind = BackendKind::kScripted;
  std::string endpoint_url;  // remote only
  std::string model_name = "captioner";
  double timeout_s = 120.0;
  int max_retries = 3;   // total attempts per call
  int backoff_ms = 500;  // doubled after every failed attempt
  std::string auth_env = "CAPFORGE_API_KEY";
  std::string script_path;  // scripted only; relative to the config file
  RoleTemperatures temperature;
};

struct RunConfig {
  Score lambda{90};
  int t_max = 4;
  std::vector<TaskDimension> dimensions{kAllDimensions.begin(), kAllDimensions.end()};
  BackendDescriptor backend;
  int parallelism = 1;
  std::uint64_t seed = 0;
  bool refiner_sees_principles = false;
};

/// Parses the "run" document (with an optional nested "backend" object) and
/// fills defaults for everything absent. Throws ConfigError.
RunConfig validate_config(const json& raw);

struct PromptTemplates {
  std::string initial;
  std::string refine_instruction;
  std::string reflect_instruction;
  std::string scorer_instruction;
};

/// Placeholder names ({name}) that each template may reference.
const std::set<std::string>& allowed_placeholders(std::string_view template_name);
/// Placeholders a template must reference to be usable.
const std::set<std::string>& required_placeholders(std::string_view template_name);

/// Extracts every {identifier} placeholder in order of appearance.
std::vector<std::string> placeholders_in(std::string_view text);

/// Replaces {identifier} slots using the given values; unknown slots are left alone.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

PromptTemplates templates_from_json(const json& j);
json to_json(const PromptTemplates& t);

class PrincipleSet {
 public:
  PrincipleSet() = default;
  explicit PrincipleSet(std::map<TaskDimension, std::string> texts);

  const std::string& for_dimension(TaskDimension d) const;
  const std::map<TaskDimension, std::string>& texts() const { return texts_; }

 private:
  std::map<TaskDimension, std::string> texts_;
};

PrincipleSet principles_from_json(const json& j);
json to_json(const PrincipleSet& p);

struct TrainSchedule {
  int epochs = 3;
  int batch_size = 16;
  double lr0 = 5e-5;
  double warmup_frac = 0.10;
  double beta = 0.1;
  std::uint64_t seed = 0;
  bool reapply_order_each_epoch = true;

  void validate() const;
};

TrainSchedule schedule_from_json(const json& j);
json to_json(const TrainSchedule& s);

json to_json(const RunConfig& c);

/// Everything a pipeline run needs, loaded from one config document.
struct PipelineConfig {
  RunConfig run;
  PromptTemplates templates;
  PrincipleSet principles;
  TrainSchedule train;
  std::string base_dir;  // directory of the config file, for relative paths
};

PipelineConfig load_pipeline_config(const json& doc);
PipelineConfig load_pipeline_config_file(const std::string& path);

/// Canonical form; load_pipeline_config(to_json(cfg)) reproduces cfg.
json to_json(const PipelineConfig& cfg);

/// sha256 over the canonical JSON form of the loaded configuration.
std::string config_digest(const PipelineConfig& cfg);

}  // namespace capforge
