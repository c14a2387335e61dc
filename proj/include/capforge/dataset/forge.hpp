#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "capforge/core/types.hpp"

namespace capforge {

struct FilterReport {
  std::size_t total_in = 0;
  std::size_t removed_single_step = 0;
  std::size_t removed_parse_error = 0;
  std::size_t retained = 0;

  friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

json to_json(const FilterReport& r);

/// Drops parse-error trajectories and single-step threshold stops. Each input
/// lands in exactly one bucket; output keeps input order.
std::pair<std::vector<Trajectory>, FilterReport> filter_trajectories(std::span<const Trajectory> trajs);

/// Best vs worst caption of a filtered trajectory. Ties: the latest max and
/// the earliest min. Returns nullopt when every score is equal (no preference
/// direction). Throws PreconditionError on fewer than two scored steps.
std::optional<PreferenceTuple> build_preference_tuple(const Trajectory& traj);

struct DatasetStats {
  static constexpr int kBinWidth = 5;
  static constexpr int kBins = 100 / kBinWidth;  // last bin also holds 100

  std::size_t tuple_count = 0;
  std::array<std::size_t, kBins> delta_histogram{};
  std::map<TaskDimension, std::size_t> per_dimension;
  std::optional<int> min_delta;
  std::optional<int> max_delta;
  double mean_delta = 0.0;
  std::size_t dropped_zero_gap = 0;  // retained trajectories that yielded no tuple

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats compute_stats(std::span<const PreferenceTuple> tuples, std::size_t dropped_zero_gap = 0);
json to_json(const DatasetStats& s);

struct DatasetBuild {
  std::vector<PreferenceTuple> tuples;
  FilterReport filter;
  DatasetStats stats;
};

/// filter_trajectories then build_preference_tuple, in input order.
DatasetBuild build_dataset(std::span<const Trajectory> trajs);

/// Preference JSONL, one tuple per line, written atomically.
void write_preferences(const std::filesystem::path& path, std::span<const PreferenceTuple> tuples);

/// Throws CorruptRecordError (store.hpp) naming the line on bad records.
std::vector<PreferenceTuple> read_preferences(const std::filesystem::path& path);

/// `<dir>/<stem>.stats.json` next to a preference file.
std::filesystem::path stats_sidecar_path(const std::filesystem::path& dataset_path);

/// Writes `data` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace capforge
