#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "attnmask/attnio.hpp"
#include "attnmask/augment.hpp"
#include "attnmask/grid.hpp"
#include "attnmask/rng.hpp"

namespace testing {

using namespace attnmask;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("attnmask_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage img(h, w);
  for (auto& p : img) {
    p = Rgb{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
            static_cast<std::uint8_t>(rng.below(256))};
  }
  return img;
}

inline Grid<float> random_map(int h, int w, Rng& rng) {
  Grid<float> m(h, w);
  for (auto& v : m) v = static_cast<float>(rng.uniform(0.0, 1.0));
  m[rng.below(m.size())] = 1.0f;
  return m;
}

inline BinaryMask random_mask(int h, int w, Rng& rng, double p = 0.5) {
  BinaryMask m(h, w);
  for (auto& v : m) v = rng.uniform01() < p ? kForeground : kBackground;
  return m;
}

// Filled ellipse as a {0,1} mask.
inline BinaryMask ellipse_mask(int h, int w, double cy, double cx, double ry, double rx) {
  BinaryMask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      m(y, x) = u * u + v * v <= 1.0 ? kForeground : kBackground;
    }
  return m;
}

// Image painted white where the mask is foreground, black elsewhere.
inline Sample indicator_sample(const BinaryMask& m) {
  Sample s{RgbImage(m.dims()), SegMask(m.dims())};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint8_t v = m[i] ? 255 : 0;
    s.image[i] = Rgb{v, v, v};
    s.mask[i] = m[i];
  }
  return s;
}

inline std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// fnv1a over relative paths and contents of every regular file, in path order.
inline std::uint64_t tree_hash(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) {
    h = fnv1a(std::filesystem::relative(f, root).generic_string(), h);
    const auto bytes = slurp(f);
    h = fnv1a(std::string_view(bytes.data(), bytes.size()), h);
  }
  return h;
}

// Small valid bundle: tokens 0..n_tokens-1, every token mapped at each
// (layer, resolution) x timestep; maps softmax-consistent across tokens.
inline AttentionBundle small_bundle(Rng& rng, int n_tokens = 3, std::vector<int> resolutions = {8, 16}, int timesteps = 2) {
  AttentionBundle b;
  b.image = random_image(32, 32, rng);
  b.prompt = "a photo of a dog";
  for (int k = 0; k < n_tokens; ++k) b.tokens.push_back({k, "tok" + std::to_string(k)});
  b.seed = rng.next_u64();
  b.model_id = "test-model";
  b.complete_tokens = true;
  for (std::size_t li = 0; li < resolutions.size(); ++li) {
    const int r = resolutions[li];
    for (int t = 0; t < timesteps; ++t) {
      std::vector<Grid<float>> maps(n_tokens, Grid<float>(r, r));
      for (int i = 0; i < r * r; ++i) {
        std::vector<double> logits(n_tokens);
        double z = 0.0;
        for (auto& l : logits) z += l = std::exp(rng.normal());
        for (int k = 0; k < n_tokens; ++k) maps[k][i] = static_cast<float>(logits[k] / z);
      }
      for (int k = 0; k < n_tokens; ++k) b.entries.push_back({static_cast<int>(li), 900 - 100 * t, k, maps[k]});
    }
  }
  return b;
}

}  // namespace testing
