#include "attnmask/attnio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "attnmask/image_io.hpp"
#include "json.hpp"

namespace attnmask {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kManifestVersion = 1;
constexpr int kMinImageSide = 8;

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::string tensor_name(const AttentionEntry& e) {
  return "tensors/L" + std::to_string(e.layer_id) + "_T" + std::to_string(e.timestep) + "_K" +
         std::to_string(e.token_index) + ".attn";
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeError("short write to " + path.string());
}

void add(std::vector<Violation>& report, Severity s, std::string code, std::string msg) {
  report.push_back(Violation{s, std::move(code), std::move(msg)});
}

}  // namespace

std::vector<char> encode_tensor(const Grid<float>& map) {
  std::vector<char> out;
  out.reserve(kTensorHeaderBytes + map.size() * 4);
  for (char c : {'A', 'T', 'T', 'N'}) out.push_back(c);
  put_le<std::uint16_t>(out, kTensorVersion);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.height()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.width()));
  for (float v : map) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Grid<float> decode_tensor(const std::vector<char>& bytes, const std::string& what) {
  if (bytes.size() < kTensorHeaderBytes) throw ValidationError(what + ": truncated tensor header");
  if (std::memcmp(bytes.data(), "ATTN", 4) != 0) throw ValidationError(what + ": bad magic");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kTensorVersion) {
    throw ValidationError(what + ": version mismatch (" + std::to_string(version) + ")");
  }
  const auto h = get_le<std::uint32_t>(bytes.data() + 8);
  const auto w = get_le<std::uint32_t>(bytes.data() + 12);
  const std::uint64_t expected = kTensorHeaderBytes + std::uint64_t{h} * w * 4;
  if (bytes.size() != expected) {
    throw ValidationError(what + ": header/payload size mismatch (" + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected) + ")");
  }
  std::vector<float> values(std::size_t{h} * w);
  const char* p = bytes.data() + kTensorHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
    values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
    if (std::isnan(values[i])) throw ValidationError(what + ": NaN in payload");
  }
  return Grid<float>(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

void write_tensor(const fs::path& path, const Grid<float>& map) { write_bytes(path, encode_tensor(map)); }

Grid<float> read_tensor(const fs::path& path) { return decode_tensor(read_file_bytes(path), path.string()); }

std::vector<Violation> validate_bundle(const AttentionBundle& bundle, const ValidationOptions& options) {
  std::vector<Violation> report;
  if (bundle.image.height() < kMinImageSide || bundle.image.width() < kMinImageSide) {
    add(report, Severity::kError, "image_dims", "image must be at least 8x8, got " + to_string(bundle.image.dims()));
  }

  std::set<int> token_ids;
  for (const auto& t : bundle.tokens) {
    if (!token_ids.insert(t.index).second) {
      add(report, Severity::kError, "duplicate_token", "token index " + std::to_string(t.index) + " listed twice");
    }
  }

  std::set<std::tuple<int, int, int>> keys;
  std::map<int, Dims> layer_dims;
  for (const auto& e : bundle.entries) {
    const std::string where = "entry (layer " + std::to_string(e.layer_id) + ", t " + std::to_string(e.timestep) +
                              ", token " + std::to_string(e.token_index) + ")";
    if (!token_ids.contains(e.token_index)) {
      add(report, Severity::kError, "unknown_token", where + " references an undeclared token");
    }
    if (!keys.insert({e.layer_id, e.timestep, e.token_index}).second) {
      add(report, Severity::kError, "duplicate_entry", where + " is duplicated");
    }
    const auto& res = options.allowed_resolutions;
    if (e.map.height() != e.map.width() || std::find(res.begin(), res.end(), e.map.height()) == res.end()) {
      add(report, Severity::kError, "resolution", where + " has unsupported resolution " + to_string(e.map.dims()));
    }
    auto [it, inserted] = layer_dims.emplace(e.layer_id, e.map.dims());
    if (!inserted && it->second != e.map.dims()) {
      add(report, Severity::kError, "layer_resolution",
          where + " disagrees with the layer's declared resolution " + to_string(it->second));
    }
    bool bad = false;
    for (float v : e.map) bad |= !std::isfinite(v) || v < 0.0f;
    if (bad) add(report, Severity::kError, "map_values", where + " has negative or non-finite values");
  }

  if (bundle.complete_tokens) {
    // Cross-attention softmax runs over tokens: at every (layer, step, pixel) the token maps sum to 1.
    std::map<std::pair<int, int>, std::vector<const AttentionEntry*>> groups;
    for (const auto& e : bundle.entries) groups[{e.layer_id, e.timestep}].push_back(&e);
    for (const auto& [key, group] : groups) {
      const Dims d = group.front()->map.dims();
      if (group.size() != token_ids.size() ||
          std::any_of(group.begin(), group.end(), [&](const auto* e) { return e->map.dims() != d; })) {
        add(report, Severity::kAdvisory, "softmax_coverage",
            "layer " + std::to_string(key.first) + " t " + std::to_string(key.second) +
                " does not cover every token");
        continue;
      }
      double worst = 0.0;
      for (std::size_t i = 0; i < d.area(); ++i) {
        double sum = 0.0;
        for (const auto* e : group) sum += e->map[i];
        worst = std::max(worst, std::abs(sum - 1.0));
      }
      if (!(worst <= options.softmax_tol)) {
        add(report, Severity::kAdvisory, "softmax_sum",
            "layer " + std::to_string(key.first) + " t " + std::to_string(key.second) +
                " token sums deviate from 1 by " + std::to_string(worst));
      }
    }
  }
  return report;
}

bool has_errors(const std::vector<Violation>& report) {
  return std::any_of(report.begin(), report.end(), [](const Violation& v) { return v.severity == Severity::kError; });
}

fs::path write_bundle(const AttentionBundle& bundle, const fs::path& dir, const ValidationOptions& options) {
  const auto report = validate_bundle(bundle, options);
  if (has_errors(report)) {
    std::string msg = "invalid bundle:";
    for (const auto& v : report) msg += " " + v.code;
    throw ValidationError(msg);
  }
  std::error_code ec;
  fs::create_directories(dir / "tensors", ec);
  if (ec) throw RuntimeError("cannot create " + dir.string() + ": " + ec.message());

  write_png_rgb(dir / "image.png", bundle.image);

  json tokens = json::array();
  for (const auto& t : bundle.tokens) tokens.push_back({{"index", t.index}, {"text", t.text}});
  json entries = json::array();
  for (const auto& e : bundle.entries) {
    const std::string name = tensor_name(e);
    entries.push_back({{"layer_id", e.layer_id},
                       {"timestep", e.timestep},
                       {"token_index", e.token_index},
                       {"h", e.map.height()},
                       {"w", e.map.width()},
                       {"file", name}});
    write_tensor(dir / name, e.map);
  }
  json manifest = {
      {"format_version", kManifestVersion},
      {"image", {{"file", "image.png"}, {"height", bundle.image.height()}, {"width", bundle.image.width()}}},
      {"prompt", bundle.prompt},
      {"tokens", tokens},
      {"entries", entries},
      {"seed", bundle.seed},
      {"model_id", bundle.model_id},
      {"complete_tokens", bundle.complete_tokens},
  };
  const std::string text = manifest.dump(2) + "\n";
  write_bytes(dir / "manifest.json", std::vector<char>(text.begin(), text.end()));
  return dir;
}

AttentionBundle read_bundle(const fs::path& dir, const ValidationOptions& options) {
  const auto raw = read_file_bytes(dir / "manifest.json");
  json m;
  try {
    m = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw ValidationError("manifest.json: " + std::string(e.what()));
  }

  AttentionBundle b;
  try {
    if (m.value("format_version", kManifestVersion) != kManifestVersion) {
      throw ValidationError("manifest.json: unsupported format_version");
    }
    const auto& image = m.at("image");
    b.image = read_png_rgb(dir / image.at("file").get<std::string>());
    if (b.image.height() != image.at("height").get<int>() || b.image.width() != image.at("width").get<int>()) {
      throw ValidationError("manifest.json: image dims disagree with image file");
    }
    b.prompt = m.at("prompt").get<std::string>();
    for (const auto& t : m.at("tokens")) b.tokens.push_back(Token{t.at("index").get<int>(), t.at("text").get<std::string>()});
    b.seed = m.at("seed").get<std::uint64_t>();
    b.model_id = m.at("model_id").get<std::string>();
    b.complete_tokens = m.value("complete_tokens", false);
    for (const auto& e : m.at("entries")) {
      AttentionEntry entry;
      entry.layer_id = e.at("layer_id").get<int>();
      entry.timestep = e.at("timestep").get<int>();
      entry.token_index = e.at("token_index").get<int>();
      const auto file = e.at("file").get<std::string>();
      entry.map = read_tensor(dir / file);
      if (e.contains("h") && (entry.map.height() != e.at("h").get<int>() || entry.map.width() != e.at("w").get<int>())) {
        throw ValidationError(file + ": tensor header disagrees with manifest h/w");
      }
      b.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest.json: " + std::string(e.what()));
  }

  const auto report = validate_bundle(b, options);
  if (has_errors(report)) {
    std::string msg = "bundle " + dir.string() + " failed validation:";
    for (const auto& v : report) {
      if (v.severity == Severity::kError) msg += " " + v.message + ";";
    }
    throw ValidationError(msg);
  }
  return b;
}

}  // namespace attnmask
