#pragma once

#include <filesystem>
#include <istream>
#include <vector>

#include "capforge/agent/loop.hpp"

namespace capforge {

// Video manifest, JSONL:
//   {"video_id": "v001", "uri": "file:///videos/v001.mp4", "duration_s": 12.5, "dimensions": ["camera"]}
// duration_s and dimensions are optional. Blank lines are ignored.

/// Throws ConfigError naming the line for malformed entries or duplicate ids.
std::vector<ManifestEntry> parse_manifest(std::istream& in);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace capforge
