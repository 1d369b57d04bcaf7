#include "attnmask/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "attnmask/attncore.hpp"
#include "attnmask/binarize.hpp"
#include "attnmask/rng.hpp"

namespace attnmask {
namespace {

struct Ellipse {
  double cx, cy, a, b, theta;
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
    return u * u + v * v <= 1.0;
  }
};

bool draw_ellipse(const FixtureSpec& spec, Rng& rng, Ellipse& e) {
  const double f = rng.uniform(spec.area_fraction.first, spec.area_fraction.second);
  const double aspect = rng.uniform(0.6, 1.6);
  e.a = std::sqrt(f * spec.height * spec.width * aspect / std::numbers::pi);
  e.b = e.a / aspect;
  e.theta = rng.uniform(0.0, std::numbers::pi);
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double ex = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
  const double ey = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
  constexpr double kMargin = 2.0;
  if (2.0 * (ex + kMargin) >= spec.width || 2.0 * (ey + kMargin) >= spec.height) return false;
  e.cx = rng.uniform(ex + kMargin, spec.width - 1.0 - ex - kMargin);
  e.cy = rng.uniform(ey + kMargin, spec.height - 1.0 - ey - kMargin);
  return true;
}

// Fraction of object pixels per map cell.
Grid<float> area_downsample(const BinaryMask& indicator, int res) {
  const int h = indicator.height(), w = indicator.width();
  std::vector<double> sum(static_cast<std::size_t>(res) * res, 0.0), count(sum.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const int cy = static_cast<int>(static_cast<long>(y) * res / h);
    for (int x = 0; x < w; ++x) {
      const std::size_t cell = static_cast<std::size_t>(cy) * res + static_cast<int>(static_cast<long>(x) * res / w);
      sum[cell] += indicator(y, x);
      count[cell] += 1.0;
    }
  }
  Grid<float> out(res, res);
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = static_cast<float>(sum[i] / count[i]);
  return out;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Grid<float> smooth(const Grid<float>& map, double sigma) {
  if (sigma <= 0.0) return map;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  const int h = map.height(), w = map.width();
  Grid<double> tmp(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * map(y, reflect101(x + t, w));
      tmp(y, x) = acc;
    }
  Grid<float> out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp(reflect101(y + t, h), x);
      out(y, x) = static_cast<float>(acc);
    }
  return out;
}

Rgb random_color(Rng& rng) {
  auto c = [&] { return static_cast<std::uint8_t>(rng.below(256)); };
  return Rgb{c(), c(), c()};
}

double color_dist(Rgb a, Rgb b) {
  const double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

std::vector<Token> fixture_tokens(const std::string& class_name) {
  std::vector<Token> tokens;
  int i = 0;
  tokens.push_back({i++, "<|startoftext|>"});
  for (const char* word : {"a", "photograph", "of", "a"}) tokens.push_back({i++, std::string(word) + "</w>"});
  tokens.push_back({i++, class_name + "</w>"});
  tokens.push_back({i++, "<|endoftext|>"});
  return tokens;
}

struct MapSet {
  // [resolution index][timestep] -> class-token map before the token mix
  std::vector<std::vector<Grid<float>>> maps;
};

AttentionBundle assemble(const FixtureSpec& spec, const std::vector<int>& resolutions, const MapSet& set,
                         const RgbImage& image, std::uint64_t seed) {
  AttentionBundle b;
  b.image = image;
  b.prompt = "a photograph of a " + spec.class_name;
  b.tokens = fixture_tokens(spec.class_name);
  b.seed = seed;
  b.model_id = "fixture";
  b.complete_tokens = spec.complete_tokens;
  const int class_token = 5;
  const int n_tokens = static_cast<int>(b.tokens.size());
  for (std::size_t ri = 0; ri < resolutions.size(); ++ri) {
    for (int l = 0; l < spec.layers_per_resolution; ++l) {
      const int layer = static_cast<int>(ri) * spec.layers_per_resolution + l;
      for (int t = 0; t < spec.timesteps; ++t) {
        const int timestep = 1000 - (t + 1) * (1000 / (spec.timesteps + 1));
        const Grid<float>& m = set.maps[ri][t];
        if (!spec.complete_tokens) {
          b.entries.push_back({layer, timestep, class_token, m});
          continue;
        }
        // Softmax-consistent split: the class token takes 0.1 + 0.6 m, the start
        // token 70% of the rest, the other tokens share the remainder.
        float peak = 0.0f;
        for (float v : m.values()) peak = std::max(peak, v);
        std::vector<Grid<float>> per_token(n_tokens, Grid<float>(m.dims()));
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double c = 0.1 + 0.6 * m[i] / peak;
          const double rest = 1.0 - c;
          per_token[0][i] = static_cast<float>(0.7 * rest);
          for (int k = 1; k < n_tokens; ++k) {
            per_token[k][i] = k == class_token ? static_cast<float>(c) : static_cast<float>(0.3 * rest / (n_tokens - 2));
          }
        }
        for (int k = 0; k < n_tokens; ++k) b.entries.push_back({layer, timestep, k, std::move(per_token[k])});
      }
    }
  }
  return b;
}

}  // namespace

void FixtureSpec::validate() const {
  if (height < 32 || width < 32) throw ValidationError("fixture: dims must be >= 32");
  if (!(area_fraction.first > 0.0 && area_fraction.first <= area_fraction.second && area_fraction.second < 0.7)) {
    throw ValidationError("fixture: area_fraction must satisfy 0 < lo <= hi < 0.7");
  }
  if (timesteps < 1 || layers_per_resolution < 1) throw ValidationError("fixture: timesteps and layers must be >= 1");
  if (!(smooth_sigma >= 0.0) || !(noise >= 0.0) || !(image_noise >= 0.0)) {
    throw ValidationError("fixture: sigma and noise levels must be >= 0");
  }
  if (!(planted_gamma > 0.0 && planted_gamma < 1.0)) throw ValidationError("fixture: planted_gamma must lie in (0,1)");
  if (class_id <= 0 || class_id >= kIgnoreLabel) throw ValidationError("fixture: class_id must lie in [1, 254]");
  if (class_name.empty() || class_name.find(' ') != std::string::npos) {
    throw ValidationError("fixture: class_name must be a single word");
  }
  if (max_attempts < 1) throw ValidationError("fixture: max_attempts must be >= 1");
  for (int r : resolutions) {
    if (r != 8 && r != 16 && r != 32 && r != 64) throw ValidationError("fixture: resolutions must be in {8,16,32,64}");
  }
}

Fixture gen_fixture(const FixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<int> resolutions;
  for (int r : spec.resolutions) {
    if (r <= std::min(spec.height, spec.width)) resolutions.push_back(r);
  }
  if (resolutions.empty()) throw ValidationError("fixture: no resolution fits the image");

  Rng rng(seed);
  const Dims dims{spec.height, spec.width};
  const std::vector<int> token_group{5};

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    Ellipse e{};
    if (!draw_ellipse(spec, rng, e)) continue;
    BinaryMask indicator(dims);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) indicator(y, x) = e.contains(x, y) ? kForeground : kBackground;

    MapSet clean, noisy;
    for (int r : resolutions) {
      const Grid<float> base = smooth(area_downsample(indicator, r), spec.smooth_sigma);
      clean.maps.emplace_back(spec.timesteps, base);
      std::vector<Grid<float>> per_step;
      for (int t = 0; t < spec.timesteps; ++t) {
        Grid<float> m = base;
        if (spec.noise > 0.0) {
          float peak = 0.0f;
          for (float v : base.values()) peak = std::max(peak, v);
          for (auto& v : m.values()) v = std::max(0.0f, v + static_cast<float>(spec.noise * peak * rng.normal()));
        }
        per_step.push_back(std::move(m));
      }
      noisy.maps.push_back(std::move(per_step));
    }

    // Colours are drawn before the gt check so retries stay on one stream.
    Rgb fg = random_color(rng), bg = random_color(rng);
    while (color_dist(fg, bg) < 120.0) bg = random_color(rng);

    bool degenerate = false;
    for (const auto& per_res : noisy.maps)
      for (const auto& m : per_res) {
        if (std::all_of(m.values().begin(), m.values().end(), [](float v) { return v <= 0.0f; })) degenerate = true;
      }
    if (degenerate) continue;

    const AttentionBundle clean_bundle = assemble(spec, resolutions, clean, RgbImage(dims), seed);
    const BinaryMask gt_mask = threshold(aggregate(clean_bundle, token_group, dims), spec.planted_gamma);
    std::size_t fg_count = 0;
    for (auto v : gt_mask.values()) fg_count += v;
    const double frac = static_cast<double>(fg_count) / static_cast<double>(dims.area());
    if (frac < spec.area_fraction.first || frac > spec.area_fraction.second) continue;

    Fixture out;
    out.gt = Sample{RgbImage(dims), SegMask(dims, 0)};
    for (std::size_t i = 0; i < gt_mask.size(); ++i) {
      const Rgb c = gt_mask[i] ? fg : bg;
      auto px = [&](std::uint8_t v) {
        const double n = spec.image_noise > 0.0 ? spec.image_noise * rng.normal() : 0.0;
        return static_cast<std::uint8_t>(std::clamp(std::lround(v + n), 0L, 255L));
      };
      out.gt.image[i] = Rgb{px(c.r), px(c.g), px(c.b)};
      out.gt.mask[i] = gt_mask[i] ? static_cast<std::uint8_t>(spec.class_id) : std::uint8_t{0};
    }
    out.bundle = assemble(spec, resolutions, noisy, out.gt.image, seed);
    out.class_tokens = token_group;
    return out;
  }
  throw RuntimeError("fixture: no draw met the area fraction after " + std::to_string(spec.max_attempts) + " attempts");
}

}  // namespace attnmask
