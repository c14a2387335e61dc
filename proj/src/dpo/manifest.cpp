#include "capforge/dpo/manifest.hpp"

#include <fstream>
#include <sstream>

#include "capforge/core/digest.hpp"
#include "capforge/dataset/forge.hpp"

namespace capforge {

namespace {

constexpr const char* kFormat = "capforge-training-manifest/1";

std::string dump_line(const ordered_json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n"; }

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string render_training_manifest(std::span<const PreferenceTuple> tuples, const std::string& source_sha256,
                                     const ManifestOptions& options) {
  std::vector<int> deltas;
  deltas.reserve(tuples.size());
  for (const auto& t : tuples) deltas.push_back(t.delta);
  const auto order = epoch_order(deltas, options.ordering, options.seed, 0, options.reapply_order_each_epoch);
  const auto batches = make_batches(order, options.batch_size);

  std::string body;
  std::size_t rank = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    for (auto i : batches[b]) {
      const auto& t = tuples[i];
      ordered_json row;
      row["rank"] = rank++;
      row["batch"] = b;
      row["source_index"] = i;
      row["video_id"] = t.video.id;
      row["dimension"] = to_string(t.dimension);
      row["delta"] = t.delta;
      row["uri"] = t.video.uri;
      row["chosen"] = t.chosen.caption;
      row["rejected"] = t.rejected.caption;
      row["score_chosen"] = t.chosen.score.value();
      row["score_rejected"] = t.rejected.score.value();
      body += dump_line(row);
    }
  }

  ordered_json header;
  header["kind"] = "header";
  header["format"] = kFormat;
  header["source_sha256"] = source_sha256;
  header["body_sha256"] = sha256_hex(body);
  header["ordering"] = to_string(options.ordering);
  header["count"] = tuples.size();
  header["batch_size"] = options.batch_size;
  header["num_batches"] = batches.size();
  header["seed"] = options.seed;
  header["reapply_order_each_epoch"] = options.reapply_order_each_epoch;
  return dump_line(header) + body;
}

void export_training_manifest(const std::filesystem::path& dataset_path, const std::filesystem::path& out_path,
                              const ManifestOptions& options) {
  const auto tuples = read_preferences(dataset_path);
  write_file_atomic(out_path, render_training_manifest(tuples, sha256_file(dataset_path), options));
}

ManifestCheck validate_training_manifest(const std::filesystem::path& manifest_path,
                                         const std::filesystem::path& dataset_path) {
  const auto text = read_all(manifest_path);
  const auto nl = text.find('\n');
  if (nl == std::string::npos) return {false, "manifest has no header line"};
  const auto header = json::parse(text.substr(0, nl), nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("kind", "") != "header" ||
      header.value("format", "") != kFormat) {
    return {false, "manifest header is missing or malformed"};
  }
  const std::string body = text.substr(nl + 1);
  if (header.value("body_sha256", "") != sha256_hex(body)) {
    return {false, "checksum mismatch: manifest body does not match body_sha256"};
  }
  const auto source = sha256_file(dataset_path);
  if (header.value("source_sha256", "") != source) {
    return {false, "checksum mismatch: source dataset does not match source_sha256"};
  }
  ManifestOptions opts;
  try {
    opts.ordering = parse_ordering(header.at("ordering").get<std::string>());
    opts.batch_size = header.at("batch_size").get<int>();
    opts.seed = header.at("seed").get<std::uint64_t>();
    opts.reapply_order_each_epoch = header.at("reapply_order_each_epoch").get<bool>();
  } catch (const std::exception& e) {
    return {false, std::string("manifest header is malformed: ") + e.what()};
  }
  const auto tuples = read_preferences(dataset_path);
  if (render_training_manifest(tuples, source, opts) != text) {
    return {false, "manifest rows do not match the order derived from the dataset"};
  }
  return {true, "ok: " + std::to_string(tuples.size()) + " rows, source " + source.substr(0, 12)};
}

}  // namespace capforge
