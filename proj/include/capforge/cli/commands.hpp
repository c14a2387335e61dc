#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "capforge/dpo/toy_data.hpp"

namespace capforge {

/// Process exit codes. Each failure class has its own code.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,         // run finished with per-key errors, or training diverged
  kExitUsage = 2,           // bad arguments, missing input files
  kExitConfig = 3,          // invalid config, templates, principles or manifest
  kExitTransport = 4,       // backend unreachable or failing after retries
  kExitDataCorruption = 5,  // corrupt store/dataset record, checksum or ledger mismatch
};

/// Raised for argument problems detected after parsing (e.g. unknown ordering).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  std::filesystem::path config;
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::optional<int> lambda;
  std::optional<int> t_max;
  std::optional<int> parallelism;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> endpoint;  // switches the backend to remote
};

struct BuildOptions {
  std::filesystem::path store_dir;
  std::filesystem::path out_path;
};

struct TrainToyOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  std::string orderings = "curriculum,shuffled";
  std::optional<std::filesystem::path> config;  // uses its "train" section
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr0;
  std::optional<double> warmup_frac;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  ToyDataParams toy;        // toy.seed is replaced by the schedule seed
  double init_scale = 0.5;  // initial logits uniform in [-init_scale, init_scale]
};

struct ExportOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_path;
  std::string ordering = "curriculum";
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool reapply_order_each_epoch = true;
};

struct ValidateOptions {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> store;
};

int cmd_generate(const GenerateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_build(const BuildOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train_toy(const TrainToyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_export(const ExportOptions& opts, std::ostream& out, std::ostream& err);
int cmd_stats(const std::filesystem::path& dataset, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateOptions& opts, std::ostream& out, std::ostream& err);

/// Text for the exit-code section of --help.
const char* exit_code_help();

}  // namespace capforge
