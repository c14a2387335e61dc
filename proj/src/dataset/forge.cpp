#include "capforge/dataset/forge.hpp"

#include <fstream>

#include "capforge/agent/store.hpp"

namespace capforge {

json to_json(const FilterReport& r) {
  return json{{"total_in", r.total_in},
              {"removed_single_step", r.removed_single_step},
              {"removed_parse_error", r.removed_parse_error},
              {"retained", r.retained}};
}

std::pair<std::vector<Trajectory>, FilterReport> filter_trajectories(std::span<const Trajectory> trajs) {
  std::vector<Trajectory> kept;
  FilterReport report;
  report.total_in = trajs.size();
  for (const auto& t : trajs) {
    if (t.terminal_reason == TerminalReason::kParseError) {
      ++report.removed_parse_error;
    } else if (t.steps.size() == 1 && t.terminal_reason == TerminalReason::kThreshold) {
      ++report.removed_single_step;
    } else {
      kept.push_back(t);
    }
  }
  report.retained = kept.size();
  return {std::move(kept), report};
}

std::optional<PreferenceTuple> build_preference_tuple(const Trajectory& traj) {
  std::size_t scored = 0;
  for (const auto& s : traj.steps) {
    if (s.parse_error || !s.score) {
      throw PreconditionError("trajectory (" + traj.video.id + ") contains a parse-error step");
    }
    ++scored;
  }
  if (scored < 2) {
    throw PreconditionError("trajectory (" + traj.video.id + ") has fewer than two scored steps");
  }
  std::size_t best = 0;
  std::size_t worst = 0;
  for (std::size_t i = 1; i < traj.steps.size(); ++i) {
    const auto s = *traj.steps[i].score;
    if (s >= *traj.steps[best].score) best = i;   // later wins ties
    if (s < *traj.steps[worst].score) worst = i;  // earlier wins ties
  }
  const auto& hi = traj.steps[best];
  const auto& lo = traj.steps[worst];
  const int delta = hi.score->value() - lo.score->value();
  if (delta == 0) return std::nullopt;
  PreferenceTuple p{traj.video,
                    traj.dimension,
                    {hi.caption, *hi.score, hi.t},
                    {lo.caption, *lo.score, lo.t},
                    delta};
  p.validate();
  return p;
}

DatasetStats compute_stats(std::span<const PreferenceTuple> tuples, std::size_t dropped_zero_gap) {
  DatasetStats s;
  s.tuple_count = tuples.size();
  s.dropped_zero_gap = dropped_zero_gap;
  long long sum = 0;
  for (const auto& t : tuples) {
    const int bin = std::min(t.delta / DatasetStats::kBinWidth, DatasetStats::kBins - 1);
    ++s.delta_histogram[static_cast<std::size_t>(bin)];
    ++s.per_dimension[t.dimension];
    s.min_delta = s.min_delta ? std::min(*s.min_delta, t.delta) : t.delta;
    s.max_delta = s.max_delta ? std::max(*s.max_delta, t.delta) : t.delta;
    sum += t.delta;
  }
  if (!tuples.empty()) s.mean_delta = static_cast<double>(sum) / static_cast<double>(tuples.size());
  return s;
}

json to_json(const DatasetStats& s) {
  json hist = json::array();
  for (std::size_t i = 0; i < s.delta_histogram.size(); ++i) {
    const int lo = static_cast<int>(i) * DatasetStats::kBinWidth;
    const int hi = lo + DatasetStats::kBinWidth;
    hist.push_back({{"lo", lo}, {"hi", hi}, {"count", s.delta_histogram[i]}});
  }
  json dims = json::object();
  for (auto d : kAllDimensions) {
    const auto it = s.per_dimension.find(d);
    dims[std::string(to_string(d))] = it == s.per_dimension.end() ? 0 : it->second;
  }
  return json{{"tuple_count", s.tuple_count},
              {"delta_histogram", hist},
              {"per_dimension", dims},
              {"min_delta", s.min_delta ? json(*s.min_delta) : json(nullptr)},
              {"max_delta", s.max_delta ? json(*s.max_delta) : json(nullptr)},
              {"mean_delta", s.mean_delta},
              {"dropped_zero_gap", s.dropped_zero_gap}};
}

DatasetBuild build_dataset(std::span<const Trajectory> trajs) {
  DatasetBuild out;
  auto [kept, report] = filter_trajectories(trajs);
  out.filter = report;
  std::size_t zero_gap = 0;
  for (const auto& t : kept) {
    if (auto p = build_preference_tuple(t)) {
      out.tuples.push_back(std::move(*p));
    } else {
      ++zero_gap;
    }
  }
  out.stats = compute_stats(out.tuples, zero_gap);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_preferences(const std::filesystem::path& path, std::span<const PreferenceTuple> tuples) {
  std::string data;
  for (const auto& t : tuples) {
    data += to_json(t).dump(-1, ' ', false, json::error_handler_t::replace);
    data += '\n';
  }
  write_file_atomic(path, data);
}

std::vector<PreferenceTuple> read_preferences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::vector<PreferenceTuple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    std::string key = "line " + std::to_string(lineno);
    if (j.is_discarded()) throw CorruptRecordError(key, lineno, "record is not valid JSON");
    try {
      if (j.is_object() && j.value("video_id", json()).is_string() && j.value("dimension", json()).is_string()) {
        key = "(" + j["video_id"].get<std::string>() + ", " + j["dimension"].get<std::string>() + ")";
      }
      out.push_back(preference_from_json(j));
    } catch (const std::exception& e) {
      throw CorruptRecordError(key, lineno, e.what());
    }
  }
  return out;
}

std::filesystem::path stats_sidecar_path(const std::filesystem::path& dataset_path) {
  return dataset_path.parent_path() / (dataset_path.stem().string() + ".stats.json");
}

}  // namespace capforge
