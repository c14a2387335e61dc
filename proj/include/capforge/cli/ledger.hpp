#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "capforge/core/types.hpp"

namespace capforge {

/// Stage order or digest chain broken.
class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-run bookkeeping kept as ledger.json next to the trajectory store.
///
/// Stages complete in the order generate -> build -> (train | export). Each
/// stage records the digest of its input, which must equal the digest of the
/// output recorded by the stage before it.
class RunLedger {
 public:
  static constexpr const char* kFileName = "ledger.json";

  RunLedger(std::string run_id, std::string config_digest);

  const std::string& run_id() const { return run_id_; }
  const std::string& config_digest() const { return config_digest_; }
  const json& stages() const { return stages_; }
  bool has(const std::string& stage) const { return stages_.contains(stage); }

  /// Records (or replaces) a stage. generate resets every later stage when its
  /// store digest changes. Throws LedgerError if the previous stage is absent
  /// or its output digest differs from `input_sha256`.
  void record(const std::string& stage, const std::string& input_sha256, const std::string& output_sha256,
              json details);

  json to_json() const;
  static RunLedger from_json(const json& j);

  static std::optional<RunLedger> load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::string run_id_;
  std::string config_digest_;
  json stages_ = json::object();
};

}  // namespace capforge
