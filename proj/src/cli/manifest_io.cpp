#include "capforge/cli/manifest_io.hpp"

#include <fstream>
#include <set>

namespace capforge {

std::vector<ManifestEntry> parse_manifest(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "manifest line " + std::to_string(lineno) + ": ";
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError(where + "not a JSON object");
    for (const auto& [k, _] : j.items()) {
      if (k != "video_id" && k != "uri" && k != "duration_s" && k != "dimensions") {
        throw ConfigError(where + "unknown field '" + k + "'");
      }
    }
    ManifestEntry e;
    try {
      e.video.id = j.at("video_id").get<std::string>();
      e.video.uri = j.at("uri").get<std::string>();
      if (j.contains("duration_s") && !j["duration_s"].is_null()) e.video.duration_s = j["duration_s"].get<double>();
      if (j.contains("dimensions")) {
        std::vector<TaskDimension> dims;
        std::set<TaskDimension> unique;
        for (const auto& d : j["dimensions"]) {
          const auto dim = parse_dimension(d.get<std::string>());
          if (!dim) throw ConfigError("unknown dimension " + d.dump());
          if (!unique.insert(*dim).second) throw ConfigError("duplicate dimension " + d.get<std::string>());
          dims.push_back(*dim);
        }
        if (dims.empty()) throw ConfigError("dimensions override must not be empty");
        e.dimensions = std::move(dims);
      }
      e.video.validate();
    } catch (const std::exception& ex) {
      throw ConfigError(where + ex.what());
    }
    if (!seen.insert(e.video.id).second) throw ConfigError(where + "duplicate video_id '" + e.video.id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  return parse_manifest(in);
}

}  // namespace capforge
