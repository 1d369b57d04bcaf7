#include "attnmask/dataset.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

#include "attnmask/image_io.hpp"
#include "attnmask/rng.hpp"

namespace attnmask {
namespace {

using nlohmann::json;

json entry_to_json(const ManifestEntry& e) {
  json j;
  j["sample_id"] = e.sample_id;
  j["image_path"] = e.image_path;
  j["mask_path"] = e.mask_path;
  j["class_id"] = e.class_id;
  j["class_name"] = e.class_name;
  j["prompt"] = e.prompt;
  j["seed"] = e.seed;
  j["gamma"] = e.gamma ? json(*e.gamma) : json(nullptr);
  j["q"] = e.q ? json(*e.q) : json(nullptr);
  j["pruned"] = e.pruned;
  j["source_id"] = e.source_id;
  j["augment_trace"] = e.augment_trace;
  j["stats"] = e.stats;
  return j;
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.sample_id = j.at("sample_id").get<std::string>();
  e.image_path = j.at("image_path").get<std::string>();
  e.mask_path = j.at("mask_path").get<std::string>();
  e.class_id = j.at("class_id").get<int>();
  e.class_name = j.value("class_name", "");
  e.prompt = j.value("prompt", "");
  e.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("gamma") && !j["gamma"].is_null()) e.gamma = j["gamma"].get<double>();
  if (j.contains("q") && !j["q"].is_null()) e.q = j["q"].get<double>();
  e.pruned = j.value("pruned", false);
  e.source_id = j.value("source_id", "");
  if (j.contains("augment_trace")) e.augment_trace = j["augment_trace"].get<std::vector<std::string>>();
  if (j.contains("stats")) e.stats = j["stats"].get<std::map<std::string, double>>();
  return e;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeError("write failed: " + path.string());
}

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    if (c == '/' || c == '\\' || c == '\0' || c == '\n') return false;
  }
  return true;
}

}  // namespace

BinaryMask clean_mask(const BinaryMask& mask, int min_area) {
  require_binary(mask, "clean_mask");
  if (min_area < 0) throw ValidationError("clean_mask: min_area must be >= 0");
  BinaryMask out = mask;
  if (min_area == 0) return out;
  const int h = mask.height(), w = mask.width();
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> stack, component;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (mask[start] != kForeground || label[start] >= 0) continue;
    component.clear();
    stack.assign(1, start);
    label[start] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      component.push_back(i);
      const int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (mask[j] == kForeground && label[j] < 0) {
            label[j] = 1;
            stack.push_back(j);
          }
        }
      }
    }
    if (component.size() < static_cast<std::size_t>(min_area)) {
      for (std::size_t i : component) out[i] = kBackground;
    }
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  json j;
  j["format_version"] = manifest.format_version;
  j["meta"] = manifest.meta;
  j["samples"] = json::array();
  for (const auto& e : manifest.samples) j["samples"].push_back(entry_to_json(e));
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dataset manifest: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestVersion) {
      throw ValidationError("dataset manifest: unsupported format_version " + std::to_string(m.format_version));
    }
    if (j.contains("meta")) m.meta = j["meta"].get<std::map<std::string, std::string>>();
    for (const auto& s : j.at("samples")) m.samples.push_back(entry_from_json(s));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dataset manifest: ") + e.what());
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& root) {
  const auto bytes = read_file_bytes(root / "manifest.json");
  return parse_manifest(std::string(bytes.begin(), bytes.end()));
}

std::uint64_t manifest_hash(const DatasetManifest& manifest) { return fnv1a(serialize_manifest(manifest)); }

DatasetManifest emit(std::span<const EmitItem> items, const EmitOptions& options, const std::filesystem::path& root) {
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!safe_id(item.entry.sample_id)) throw ValidationError("emit: invalid sample_id '" + item.entry.sample_id + "'");
    if (!ids.insert(item.entry.sample_id).second) {
      throw ValidationError("emit: sample_id collision '" + item.entry.sample_id + "'");
    }
    validate_sample(item.sample);
  }

  std::error_code ec;
  for (const char* sub : {"images", "masks"}) {
    std::filesystem::create_directories(root / sub, ec);
    if (ec) throw RuntimeError("emit: cannot create " + (root / sub).string() + ": " + ec.message());
  }
  if (options.voc_palette) {
    std::filesystem::create_directories(root / "masks_voc", ec);
    if (ec) throw RuntimeError("emit: cannot create masks_voc: " + ec.message());
  }

  DatasetManifest manifest;
  manifest.meta = options.meta;
  std::string train;
  for (const auto& item : items) {
    ManifestEntry e = item.entry;
    e.image_path = "images/" + e.sample_id + ".png";
    e.mask_path = "masks/" + e.sample_id + ".png";
    write_png_rgb(root / e.image_path, item.sample.image);
    write_png_gray(root / e.mask_path, item.sample.mask);
    if (options.voc_palette) write_png_voc_palette(root / "masks_voc" / (e.sample_id + ".png"), item.sample.mask);
    if (!e.pruned) train += e.sample_id + "\n";
    manifest.samples.push_back(std::move(e));
  }
  write_text(root / "train.txt", train);
  write_text(root / "manifest.json", serialize_manifest(manifest));
  return manifest;
}

EvalReport evaluate_miou(const std::map<std::string, SegMask>& predictions, const std::map<std::string, SegMask>& gts,
                         std::span<const int> class_ids) {
  std::map<int, std::size_t> slot;
  for (int c : class_ids) {
    if (c < 0 || c >= kIgnoreLabel) throw ValidationError("evaluate_miou: class ids must lie in [0, 254]");
    if (!slot.emplace(c, slot.size()).second) throw ValidationError("evaluate_miou: duplicate class id");
  }
  std::vector<std::pair<const SegMask*, const SegMask*>> pairs;
  for (const auto& [id, gt] : gts) {
    const auto it = predictions.find(id);
    if (it == predictions.end()) throw ValidationError("evaluate_miou: missing prediction for '" + id + "'");
    require_same_dims(it->second.dims(), gt.dims(), "evaluate_miou '" + id + "'");
    pairs.emplace_back(&it->second, &gt);
  }

  // Class id -> slot lookup; -1 for ids outside the evaluated set.
  std::array<int, 256> lut;
  lut.fill(-1);
  for (const auto& [c, s] : slot) lut[c] = static_cast<int>(s);

  const std::size_t n = slot.size();
  std::vector<ClassCounts> total(n);
#pragma omp parallel
  {
    std::vector<ClassCounts> local(n);
#pragma omp for schedule(dynamic)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const SegMask& pred = *pairs[p].first;
      const SegMask& gt = *pairs[p].second;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == kIgnoreLabel) continue;
        const int g = lut[gt[i]], q = lut[pred[i]];
        if (g == q) {
          if (g >= 0) ++local[g].tp;
          continue;
        }
        if (g >= 0) ++local[g].fn;
        if (q >= 0) ++local[q].fp;
      }
    }
#pragma omp critical
    for (std::size_t s = 0; s < n; ++s) {
      total[s].tp += local[s].tp;
      total[s].fp += local[s].fp;
      total[s].fn += local[s].fn;
    }
  }

  EvalReport report;
  double sum = 0.0;
  for (const auto& [c, s] : slot) {
    report.counts[c] = total[s];
    const std::uint64_t denom = total[s].tp + total[s].fp + total[s].fn;
    if (denom == 0) continue;
    const double v = static_cast<double>(total[s].tp) / static_cast<double>(denom);
    report.per_class_iou[c] = v;
    sum += v;
  }
  if (!report.per_class_iou.empty()) report.miou = sum / static_cast<double>(report.per_class_iou.size());
  return report;
}

}  // namespace attnmask
