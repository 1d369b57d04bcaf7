#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnmask/augment.hpp"
#include "attnmask/grid.hpp"

namespace attnmask {

// Drops 8-connected foreground components smaller than min_area.
BinaryMask clean_mask(const BinaryMask& mask, int min_area);

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string sample_id;
  std::string image_path;  // relative to the dataset root
  std::string mask_path;
  int class_id = 0;
  std::string class_name;
  std::string prompt;
  std::uint64_t seed = 0;
  std::optional<double> gamma;  // adaptive threshold picked for the sample
  std::optional<double> q;      // self-confidence
  bool pruned = false;
  std::string source_id;  // original sample for augmented copies, else empty
  std::vector<std::string> augment_trace;
  std::map<std::string, double> stats;  // per-stage diagnostics (seed counts, solver iterations, ...)
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  int format_version = kManifestVersion;
  std::map<std::string, std::string> meta;
  std::vector<ManifestEntry> samples;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct EmitItem {
  ManifestEntry entry;  // paths are filled in by emit
  Sample sample;
};

struct EmitOptions {
  bool voc_palette = false;  // also write masks_voc/<id>.png with the VOC colour map
  std::map<std::string, std::string> meta;
};

// Writes images/, masks/, manifest.json and train.txt (kept ids, in input
// order). Pruned samples are written but left out of train.txt.
DatasetManifest emit(std::span<const EmitItem> items, const EmitOptions& options, const std::filesystem::path& root);

std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);
DatasetManifest read_manifest(const std::filesystem::path& root);
// fnv1a of the serialized manifest.
std::uint64_t manifest_hash(const DatasetManifest& manifest);
std::string hex64(std::uint64_t v);

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct EvalReport {
  std::map<int, ClassCounts> counts;
  std::map<int, double> per_class_iou;  // only classes with tp + fp + fn > 0
  double miou = 0.0;                    // 0 when no class could be evaluated
};

// Counts accumulate over all images; gt == 255 pixels are skipped. Every gt
// sample needs a prediction of the same dims.
EvalReport evaluate_miou(const std::map<std::string, SegMask>& predictions, const std::map<std::string, SegMask>& gts,
                         std::span<const int> class_ids);

}  // namespace attnmask
