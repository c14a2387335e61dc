#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "capforge/core/types.hpp"

namespace capforge {

using TrajectoryKey = std::pair<std::string, TaskDimension>;

/// A store record that cannot be decoded or breaks a trajectory invariant.
class CorruptRecordError : public std::runtime_error {
 public:
  CorruptRecordError(const std::string& key, std::size_t line, const std::string& what);
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// Append-only JSONL trajectory store.
///
/// Each trajectory is written as one block: a "step" record per step keyed by
/// (video_id, dimension, t), then a "complete" marker. Blocks from different
/// workers never interleave. A key counts as stored only once its marker is
/// on disk, so a killed run resumes by redoing the keys without one.
class TrajectoryStore {
 public:
  static constexpr const char* kFileName = "trajectories.jsonl";

  /// Opens (creating if needed) the store in `dir`. A torn final line left by
  /// a crash is cut off so appends start on a clean line.
  explicit TrajectoryStore(const std::filesystem::path& dir);

  bool contains(const TrajectoryKey& key) const;
  std::optional<TerminalReason> terminal_of(const TrajectoryKey& key) const;
  std::size_t completed_count() const;

  void append(const Trajectory& traj);

  /// Rewrites the file with exactly one block per completed key, ordered by
  /// `order` (keys not listed follow in file order). Atomic via rename.
  void compact(const std::vector<TrajectoryKey>& order);

  const std::filesystem::path& path() const { return path_; }

  /// Reads every completed trajectory in file order. Incomplete blocks are
  /// skipped; undecodable lines throw CorruptRecordError.
  static std::vector<Trajectory> read_all(const std::filesystem::path& dir);

 private:
  std::filesystem::path path_;
  std::map<TrajectoryKey, TerminalReason> completed_;
  mutable std::mutex mu_;
  std::ofstream out_;
};

/// Serialized block for one trajectory (step records then the marker), newline-terminated.
std::string store_block(const Trajectory& traj);

}  // namespace capforge
