#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

struct Token {
  int index = 0;
  std::string text;
  friend bool operator==(const Token&, const Token&) = default;
};

// One captured cross-attention map: (U-Net layer, diffusion step, token).
struct AttentionEntry {
  int layer_id = 0;
  int timestep = 0;
  int token_index = 0;
  Grid<float> map;
  friend bool operator==(const AttentionEntry&, const AttentionEntry&) = default;
};

// Everything captured for one generated image.
struct AttentionBundle {
  RgbImage image;
  std::string prompt;
  std::vector<Token> tokens;
  std::vector<AttentionEntry> entries;
  std::uint64_t seed = 0;
  std::string model_id;
  // True when the exporter dumped every token, so per-pixel token sums should be 1.
  bool complete_tokens = false;

  friend bool operator==(const AttentionBundle&, const AttentionBundle&) = default;
};

enum class Severity { kError, kAdvisory };

struct Violation {
  Severity severity = Severity::kError;
  std::string code;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationOptions {
  std::vector<int> allowed_resolutions{8, 16, 32, 64};
  double softmax_tol = 1e-3;
};

// Pure: the report lists every broken invariant; empty iff the bundle is valid
// (advisory softmax findings included).
std::vector<Violation> validate_bundle(const AttentionBundle& bundle, const ValidationOptions& options = {});
bool has_errors(const std::vector<Violation>& report);

// Writes <dir>/manifest.json, <dir>/image.png and one tensor file per entry
// under <dir>/tensors/. Throws ValidationError for an invalid bundle.
std::filesystem::path write_bundle(const AttentionBundle& bundle, const std::filesystem::path& dir,
                                   const ValidationOptions& options = {});
// Throws ValidationError on format errors or hard invariant violations.
AttentionBundle read_bundle(const std::filesystem::path& dir, const ValidationOptions& options = {});

// Tensor file: 16-byte little-endian header {"ATTN", u16 version, u16 reserved,
// u32 h, u32 w} followed by h*w float32 values, row-major.
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 16;

std::vector<char> encode_tensor(const Grid<float>& map);
Grid<float> decode_tensor(const std::vector<char>& bytes, const std::string& what);
void write_tensor(const std::filesystem::path& path, const Grid<float>& map);
Grid<float> read_tensor(const std::filesystem::path& path);

}  // namespace attnmask
