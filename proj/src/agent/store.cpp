#include "capforge/agent/store.hpp"

#include <map>
#include <regex>
#include <sstream>

namespace capforge {

namespace {

using ojson = nlohmann::ordered_json;

std::string key_name(const std::string& video_id, std::string_view dim) {
  return "(" + video_id + ", " + std::string(dim) + ")";
}

std::string dump_line(const ojson& j) { return j.dump(-1, ' ', false, ojson::error_handler_t::replace); }

// Best-effort key recovery from a line that did not parse.
std::string salvage_key(const std::string& line) {
  static const std::regex kId(R"re("video_id":"((?:[^"\\]|\\.)*)")re");
  static const std::regex kDim(R"re("dimension":"([a-z_]+)")re");
  static const std::regex kT(R"re("t":(\d+))re");
  std::smatch id, dim, t;
  std::string out = "(";
  out += std::regex_search(line, id, kId) ? id[1].str() : "?";
  out += ", ";
  out += std::regex_search(line, dim, kDim) ? dim[1].str() : "?";
  if (std::regex_search(line, t, kT)) out += ", t=" + t[1].str();
  return out + ")";
}

struct Pending {
  VideoRef video;
  std::vector<TrajectoryStep> steps;
};

// Streams store lines, calling `on_complete` for every finished trajectory.
template <typename OnComplete>
void scan_store(std::istream& in, OnComplete on_complete) {
  std::map<TrajectoryKey, Pending> pending;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw CorruptRecordError(salvage_key(line), lineno, "record is not valid JSON");
    }
    std::string key_text = salvage_key(line);
    try {
      const auto kind = j.at("kind").get<std::string>();
      const auto video_id = j.at("video_id").get<std::string>();
      const auto dim_name = j.at("dimension").get<std::string>();
      key_text = key_name(video_id, dim_name);
      const auto dim = parse_dimension(dim_name);
      if (!dim) throw InvariantError("unknown dimension '" + dim_name + "'");
      const TrajectoryKey key{video_id, *dim};
      if (kind == "step") {
        const int t = j.at("t").get<int>();
        key_text = key_name(video_id, dim_name) + " t=" + std::to_string(t);
        auto step = step_from_json(j.at("step"));
        if (step.t != t) throw InvariantError("step index mismatch");
        auto& p = pending[key];
        if (t == 0) p = Pending{video_from_json(j.at("video")), {}};
        if (static_cast<int>(p.steps.size()) != t) throw InvariantError("steps out of order");
        p.steps.push_back(std::move(step));
      } else if (kind == "complete") {
        auto it = pending.find(key);
        if (it == pending.end()) throw InvariantError("completion marker without steps");
        const auto n = j.at("num_steps").get<std::size_t>();
        if (n != it->second.steps.size()) throw InvariantError("marker step count does not match");
        const auto reason_name = j.at("terminal_reason").get<std::string>();
        const auto reason = parse_terminal_reason(reason_name);
        if (!reason) throw InvariantError("unknown terminal reason '" + reason_name + "'");
        Trajectory traj{std::move(it->second.video), *dim, std::move(it->second.steps), *reason};
        pending.erase(it);
        on_complete(std::move(traj), lineno);
      } else {
        throw InvariantError("unknown record kind '" + kind + "'");
      }
    } catch (const CorruptRecordError&) {
      throw;
    } catch (const std::exception& e) {
      throw CorruptRecordError(key_text, lineno, e.what());
    }
  }
}

}  // namespace

CorruptRecordError::CorruptRecordError(const std::string& key, std::size_t line, const std::string& what)
    : std::runtime_error("corrupt store record " + key + " at line " + std::to_string(line) + ": " + what),
      key_(key),
      line_(line) {}

std::string store_block(const Trajectory& traj) {
  std::string out;
  const auto dim = std::string(to_string(traj.dimension));
  for (const auto& s : traj.steps) {
    ojson rec;
    rec["kind"] = "step";
    rec["video_id"] = traj.video.id;
    rec["dimension"] = dim;
    rec["t"] = s.t;
    rec["video"] = ojson::parse(to_json(traj.video).dump());
    rec["step"] = ojson::parse(to_json(s).dump(-1, ' ', false, json::error_handler_t::replace));
    out += dump_line(rec);
    out += '\n';
  }
  ojson marker;
  marker["kind"] = "complete";
  marker["video_id"] = traj.video.id;
  marker["dimension"] = dim;
  marker["terminal_reason"] = to_string(traj.terminal_reason);
  marker["num_steps"] = traj.steps.size();
  out += dump_line(marker);
  out += '\n';
  return out;
}

TrajectoryStore::TrajectoryStore(const std::filesystem::path& dir) : path_(dir / kFileName) {
  std::filesystem::create_directories(dir);
  if (std::filesystem::exists(path_)) {
    std::string data;
    {
      std::ifstream in(path_, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      data = ss.str();
    }
    if (!data.empty() && data.back() != '\n') {
      const auto keep = data.rfind('\n');
      data.resize(keep == std::string::npos ? 0 : keep + 1);
      std::filesystem::resize_file(path_, data.size());
    }
    std::istringstream in(data);
    scan_store(in, [&](Trajectory&& t, std::size_t) { completed_[{t.video.id, t.dimension}] = t.terminal_reason; });
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open trajectory store " + path_.string());
}

bool TrajectoryStore::contains(const TrajectoryKey& key) const {
  std::lock_guard lock(mu_);
  return completed_.count(key) > 0;
}

std::optional<TerminalReason> TrajectoryStore::terminal_of(const TrajectoryKey& key) const {
  std::lock_guard lock(mu_);
  const auto it = completed_.find(key);
  if (it == completed_.end()) return std::nullopt;
  return it->second;
}

std::size_t TrajectoryStore::completed_count() const {
  std::lock_guard lock(mu_);
  return completed_.size();
}

void TrajectoryStore::append(const Trajectory& traj) {
  const auto block = store_block(traj);
  std::lock_guard lock(mu_);
  out_.write(block.data(), static_cast<std::streamsize>(block.size()));
  out_.flush();
  if (!out_) throw std::runtime_error("write to trajectory store failed");
  completed_[{traj.video.id, traj.dimension}] = traj.terminal_reason;
}

void TrajectoryStore::compact(const std::vector<TrajectoryKey>& order) {
  std::lock_guard lock(mu_);
  out_.close();
  std::vector<Trajectory> all;
  {
    std::ifstream in(path_, std::ios::binary);
    scan_store(in, [&](Trajectory&& t, std::size_t) { all.push_back(std::move(t)); });
  }
  // Last completed block per key wins.
  std::map<TrajectoryKey, std::size_t> latest;
  for (std::size_t i = 0; i < all.size(); ++i) latest[{all[i].video.id, all[i].dimension}] = i;

  std::string data;
  std::set<TrajectoryKey> written;
  for (const auto& key : order) {
    const auto it = latest.find(key);
    if (it == latest.end() || written.count(key)) continue;
    data += store_block(all[it->second]);
    written.insert(key);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const TrajectoryKey key{all[i].video.id, all[i].dimension};
    if (latest[key] != i || written.count(key)) continue;
    data += store_block(all[i]);
    written.insert(key);
  }

  auto tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path_);
  out_.open(path_, std::ios::app | std::ios::binary);
}

std::vector<Trajectory> TrajectoryStore::read_all(const std::filesystem::path& dir) {
  const auto path = dir / kFileName;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("no trajectory store at " + path.string());
  std::vector<Trajectory> out;
  // Torn last line: a store that does not end in '\n' is corrupt for readers.
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size > 0) {
    in.seekg(-1, std::ios::end);
    char last = 0;
    in.get(last);
    if (last != '\n') {
      in.seekg(0);
      std::string line, prev;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        prev = line;
        ++n;
      }
      throw CorruptRecordError(salvage_key(prev), n, "truncated record");
    }
  }
  in.seekg(0);
  scan_store(in, [&](Trajectory&& t, std::size_t) { out.push_back(std::move(t)); });
  return out;
}

}  // namespace capforge
