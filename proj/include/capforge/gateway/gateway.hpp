#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "capforge/core/config.hpp"
#include "capforge/gateway/backend.hpp"
#include "capforge/gateway/scorer_parser.hpp"

namespace capforge {

struct AuditRecord {
  std::uint64_t seq = 0;
  Role role = Role::kCaptioner;
  std::string request_digest;
  std::optional<std::string> response_text;  // absent for failed attempts
  std::optional<std::string> error;
  std::int64_t latency_ms = 0;
};

/// Append-only JSONL log of every backend attempt. Thread-safe; seq values
/// increase monotonically through the file.
class AuditLog {
 public:
  explicit AuditLog(const std::filesystem::path& path);

  void record(Role role, const std::string& digest, const std::optional<std::string>& response,
              const std::optional<std::string>& error, std::int64_t latency_ms);

  static std::vector<AuditRecord> read(const std::filesystem::path& path);

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::uint64_t next_seq_ = 0;
};

/// Serves recorded responses keyed by request digest, in recorded order.
class ReplayBackend : public ModelBackend {
 public:
  ReplayBackend(const std::vector<AuditRecord>& records, std::string model_name);

  std::string complete(const ChatRequest& req) override;

 private:
  std::string model_name_;
  std::map<std::string, std::deque<std::string>> responses_;
  std::mutex mu_;
};

struct GatewayOptions {
  std::string model_name = "captioner";
  int max_retries = 3;  // total attempts per call
  int backoff_ms = 0;
  RoleTemperatures temperature;
  int parallelism = 1;  // global in-flight request limit

  static GatewayOptions from(const RunConfig& cfg);
};

/// Inputs the refiner sees about the current round.
struct RefineInput {
  Prompt prompt;
  std::string caption;
  Score score;
  std::string suggestion;
};

/// The previous round as the reflector sees it.
struct PreviousRound {
  Prompt prompt;
  std::string caption;
  std::optional<ChainOfThought> cot;
};

/// The single captioning model, used in its four roles. Owns retries, the
/// audit log and the in-flight limit; safe to share between trajectory workers.
class ModelGateway {
 public:
  ModelGateway(ModelBackend& backend, GatewayOptions opts, AuditLog* audit = nullptr);

  std::string generate_caption(const VideoRef& video, TaskDimension dim, const Prompt& prompt);

  /// Transport failures throw; malformed replies come back as ParseFailure.
  ScorerResult score_caption(const VideoRef& video, TaskDimension dim, const std::string& caption,
                             const PrincipleSet& principles, const std::string& scorer_instruction);

  /// `principles` is appended to the request when non-null.
  std::pair<Prompt, ChainOfThought> refine_prompt(const VideoRef& video, TaskDimension dim,
                                                  const RefineInput& current,
                                                  const std::string& refine_instruction,
                                                  const std::string* principles = nullptr);

  /// Throws PreconditionError when the previous round carries no chain-of-thought.
  std::pair<Prompt, ChainOfThought> reflect_prompt(const VideoRef& video, TaskDimension dim,
                                                   const RefineInput& current, const PreviousRound& previous,
                                                   const std::string& reflect_instruction);

  std::uint64_t attempts() const { return attempts_.load(); }

 private:
  std::string call(ChatRequest req);

  ModelBackend& backend_;
  GatewayOptions opts_;
  AuditLog* audit_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace capforge
