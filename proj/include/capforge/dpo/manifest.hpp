#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "capforge/core/types.hpp"
#include "capforge/dpo/curriculum.hpp"

namespace capforge {

struct ManifestOptions {
  Ordering ordering = Ordering::kCurriculum;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool reapply_order_each_epoch = true;
};

/// Training manifest: one header line followed by one row per tuple in
/// visiting order (epoch 0).
///
///   {"kind":"header","format":"capforge-training-manifest/1","source_sha256":...,
///    "body_sha256":...,"ordering":...,"count":...,"batch_size":...,"num_batches":...,
///    "seed":...,"reapply_order_each_epoch":...}
///   {"rank":0,"batch":0,"source_index":...,"video_id":...,"dimension":...,"delta":...,...}
///
/// body_sha256 covers every byte after the header line.
std::string render_training_manifest(std::span<const PreferenceTuple> tuples, const std::string& source_sha256,
                                     const ManifestOptions& options);

/// Reads the dataset at `dataset_path`, writes the manifest atomically.
void export_training_manifest(const std::filesystem::path& dataset_path, const std::filesystem::path& out_path,
                              const ManifestOptions& options);

struct ManifestCheck {
  bool ok = false;
  std::string message;
};

/// Checks the header's checksums against the body and the source dataset, then
/// re-renders from the dataset and compares bytes.
ManifestCheck validate_training_manifest(const std::filesystem::path& manifest_path,
                                         const std::filesystem::path& dataset_path);

}  // namespace capforge
