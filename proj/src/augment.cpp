#include "attnmask/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "attnmask/rng.hpp"

namespace attnmask {
namespace {

inline std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

RgbImage blur_impl(const RgbImage& image, const std::vector<double>& k, bool parallel) {
  const int h = image.height(), w = image.width();
  const int r = static_cast<int>(k.size() / 2);
  std::vector<std::array<double, 3>> tmp(image.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> acc{0, 0, 0};
      for (int t = -r; t <= r; ++t) {
        const Rgb p = image(y, reflect101(x + t, w));
        const double kv = k[t + r];
        acc[0] += kv * p.r;
        acc[1] += kv * p.g;
        acc[2] += kv * p.b;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  RgbImage out(image.dims());
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> acc{0, 0, 0};
      for (int t = -r; t <= r; ++t) {
        const auto& p = tmp[static_cast<std::size_t>(reflect101(y + t, h)) * w + x];
        const double kv = k[t + r];
        acc[0] += kv * p[0];
        acc[1] += kv * p[1];
        acc[2] += kv * p[2];
      }
      out(y, x) = Rgb{to_u8(acc[0]), to_u8(acc[1]), to_u8(acc[2])};
    }
  }
  return out;
}

std::vector<double> sampled_gaussian(double sigma, int radius) {
  if (!(sigma > 0.0) || radius < 0) throw ValidationError("gaussian: sigma must be > 0 and radius >= 0");
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

using Mat3 = std::array<double, 9>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

Mat3 adjugate(const Mat3& m) {
  return {m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
          m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
          m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
}

// Closed-form projective map of the unit square (0,0),(1,0),(1,1),(0,1) onto q.
Mat3 square_to_quad(const std::array<Point2, 4>& q) {
  const double sx = q[0].x - q[1].x + q[2].x - q[3].x;
  const double sy = q[0].y - q[1].y + q[2].y - q[3].y;
  if (sx == 0.0 && sy == 0.0) {
    return {q[1].x - q[0].x, q[2].x - q[1].x, q[0].x, q[1].y - q[0].y, q[2].y - q[1].y, q[0].y, 0.0, 0.0, 1.0};
  }
  const double dx1 = q[1].x - q[2].x, dx2 = q[3].x - q[2].x;
  const double dy1 = q[1].y - q[2].y, dy2 = q[3].y - q[2].y;
  const double den = dx1 * dy2 - dx2 * dy1;
  if (den == 0.0) throw ValidationError("homography: degenerate quad");
  const double g = (sx * dy2 - dx2 * sy) / den;
  const double h = (dx1 * sy - sx * dy1) / den;
  return {q[1].x - q[0].x + g * q[1].x, q[3].x - q[0].x + h * q[3].x, q[0].x,
          q[1].y - q[0].y + g * q[1].y, q[3].y - q[0].y + h * q[3].y, q[0].y,
          g,                            h,                            1.0};
}

bool convex_quad(const std::array<Point2, 4>& q) {
  double sign = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2 a = q[i], b = q[(i + 1) % 4], c = q[(i + 2) % 4];
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (std::abs(cross) < 1e-9) return false;
    if (sign == 0.0) sign = cross;
    if ((cross > 0.0) != (sign > 0.0)) return false;
  }
  return true;
}

Sample warp_impl(const Sample& sample, const Homography& hm, bool parallel) {
  validate_sample(sample);
  const int h = sample.image.height(), w = sample.image.width();
  Sample out{RgbImage(h, w), SegMask(h, w, kIgnoreLabel)};
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2 s = hm.apply({static_cast<double>(x), static_cast<double>(y)});
      // Same validity domain for both paths keeps image and mask co-registered.
      if (!(s.x >= -0.5 && s.x < w - 0.5 && s.y >= -0.5 && s.y < h - 0.5)) continue;
      const int nx = std::clamp(static_cast<int>(std::floor(s.x + 0.5)), 0, w - 1);
      const int ny = std::clamp(static_cast<int>(std::floor(s.y + 0.5)), 0, h - 1);
      out.mask(y, x) = sample.mask(ny, nx);

      const double cx = std::clamp(s.x, 0.0, static_cast<double>(w - 1));
      const double cy = std::clamp(s.y, 0.0, static_cast<double>(h - 1));
      const int x0 = std::min(static_cast<int>(cx), std::max(w - 2, 0));
      const int y0 = std::min(static_cast<int>(cy), std::max(h - 2, 0));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = cx - x0, fy = cy - y0;
      const Rgb a = sample.image(y0, x0), b = sample.image(y0, x1), c = sample.image(y1, x0), d = sample.image(y1, x1);
      auto lerp = [&](double va, double vb, double vc, double vd) {
        return (va * (1 - fx) + vb * fx) * (1 - fy) + (vc * (1 - fx) + vd * fx) * fy;
      };
      out.image(y, x) = Rgb{to_u8(lerp(a.r, b.r, c.r, d.r)), to_u8(lerp(a.g, b.g, c.g, d.g)),
                            to_u8(lerp(a.b, b.b, c.b, d.b))};
    }
  }
  return out;
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

}  // namespace

void validate_sample(const Sample& sample) {
  require_same_dims(sample.image.dims(), sample.mask.dims(), "sample image/mask");
  if (sample.image.empty()) throw ValidationError("empty sample");
}

RgbImage resize_bilinear(const RgbImage& image, Dims out) {
  if (image.empty() || out.height <= 0 || out.width <= 0) throw ValidationError("resize: empty input or output");
  const int h = image.height(), w = image.width();
  RgbImage dst(out);
  const double sy = static_cast<double>(h) / out.height, sx = static_cast<double>(w) / out.width;
  for (int y = 0; y < out.height; ++y) {
    const double fy0 = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = std::min(static_cast<int>(fy0), std::max(h - 2, 0));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = fy0 - y0;
    for (int x = 0; x < out.width; ++x) {
      const double fx0 = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = std::min(static_cast<int>(fx0), std::max(w - 2, 0));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = fx0 - x0;
      const Rgb a = image(y0, x0), b = image(y0, x1), c = image(y1, x0), d = image(y1, x1);
      auto lerp = [&](double va, double vb, double vc, double vd) {
        return (va * (1 - fx) + vb * fx) * (1 - fy) + (vc * (1 - fx) + vd * fx) * fy;
      };
      dst(y, x) = Rgb{to_u8(lerp(a.r, b.r, c.r, d.r)), to_u8(lerp(a.g, b.g, c.g, d.g)), to_u8(lerp(a.b, b.b, c.b, d.b))};
    }
  }
  return dst;
}

SegMask resize_nearest(const SegMask& mask, Dims out) {
  if (mask.empty() || out.height <= 0 || out.width <= 0) throw ValidationError("resize: empty input or output");
  const int h = mask.height(), w = mask.width();
  SegMask dst(out);
  for (int y = 0; y < out.height; ++y) {
    const int ys = std::min(static_cast<int>(std::floor((y + 0.5) * h / out.height)), h - 1);
    for (int x = 0; x < out.width; ++x) {
      const int xs = std::min(static_cast<int>(std::floor((x + 0.5) * w / out.width)), w - 1);
      dst(y, x) = mask(ys, xs);
    }
  }
  return dst;
}

Sample splice_with(std::span<const Sample> samples, SpliceGrid grid, Dims out, std::span<const std::size_t> picks) {
  if (samples.empty()) throw ValidationError("splice: no samples");
  if (grid.rows < 1 || grid.cols < 1) throw ValidationError("splice: grid must be at least 1x1");
  if (out.height < grid.rows || out.width < grid.cols) throw ValidationError("splice: output smaller than grid");
  if (picks.size() != static_cast<std::size_t>(grid.rows) * grid.cols) throw ValidationError("splice: wrong pick count");
  for (const auto& s : samples) validate_sample(s);

  Sample result{RgbImage(out), SegMask(out, kIgnoreLabel)};
  const int cell_h = out.height / grid.rows, cell_w = out.width / grid.cols;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const std::size_t pick = picks[static_cast<std::size_t>(r) * grid.cols + c];
      if (pick >= samples.size()) throw ValidationError("splice: pick out of range");
      const int y0 = r * cell_h, x0 = c * cell_w;
      const int ch = r == grid.rows - 1 ? out.height - y0 : cell_h;
      const int cw = c == grid.cols - 1 ? out.width - x0 : cell_w;
      const RgbImage img = resize_bilinear(samples[pick].image, {ch, cw});
      const SegMask msk = resize_nearest(samples[pick].mask, {ch, cw});
      for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
          result.image(y0 + y, x0 + x) = img(y, x);
          result.mask(y0 + y, x0 + x) = msk(y, x);
        }
      }
    }
  }
  return result;
}

Sample splice(std::span<const Sample> samples, SpliceGrid grid, Dims out, std::uint64_t seed) {
  if (samples.empty()) throw ValidationError("splice: no samples");
  if (grid.rows < 1 || grid.cols < 1) throw ValidationError("splice: grid must be at least 1x1");
  Rng rng(seed);
  std::vector<std::size_t> picks(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (auto& p : picks) p = rng.below(samples.size());
  return splice_with(samples, grid, out, picks);
}

int effective_kernel_length(int kernel_len) {
  if (kernel_len < 6 || kernel_len > 22) throw ValidationError("blur kernel length must lie in [6, 22]");
  return kernel_len % 2 == 0 ? kernel_len + 1 : kernel_len;
}

double kernel_sigma(int effective_len) { return 0.3 * ((effective_len - 1) * 0.5 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(int kernel_len) {
  const int len = effective_kernel_length(kernel_len);
  return sampled_gaussian(kernel_sigma(len), len / 2);
}

RgbImage gaussian_blur(const RgbImage& image, int kernel_len) { return blur_impl(image, gaussian_kernel(kernel_len), true); }

RgbImage gaussian_blur_sigma(const RgbImage& image, double sigma, int radius) {
  return blur_impl(image, sampled_gaussian(sigma, radius), true);
}

Sample paste_region(const Sample& target, const Sample& source, Rect rect) {
  validate_sample(target);
  validate_sample(source);
  require_same_dims(target.image.dims(), source.image.dims(), "occlude");
  if (rect.height < 0 || rect.width < 0 || rect.y < 0 || rect.x < 0 || rect.y + rect.height > target.image.height() ||
      rect.x + rect.width > target.image.width()) {
    throw ValidationError("occlusion rectangle outside the frame");
  }
  Sample out = target;
  for (int y = rect.y; y < rect.y + rect.height; ++y) {
    for (int x = rect.x; x < rect.x + rect.width; ++x) {
      out.image(y, x) = source.image(y, x);
      out.mask(y, x) = source.mask(y, x);
    }
  }
  return out;
}

Sample occlude(const Sample& target, const Sample& source, std::pair<double, double> area_range, std::uint64_t seed,
               Rect* chosen) {
  require_same_dims(target.image.dims(), source.image.dims(), "occlude");
  const auto [lo, hi] = area_range;
  if (!(lo > 0.0 && lo <= hi && hi < 1.0)) throw ValidationError("occlusion area range must lie inside (0,1)");
  Rng rng(seed);
  const double lambda = rng.uniform(lo, hi);
  const int h = target.image.height(), w = target.image.width();
  Rect rect;
  rect.height = std::clamp(static_cast<int>(std::lround(h * std::sqrt(lambda))), 0, h);
  rect.width = std::clamp(static_cast<int>(std::lround(w * std::sqrt(lambda))), 0, w);
  rect.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - rect.height) + 1));
  rect.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - rect.width) + 1));
  if (chosen) *chosen = rect;
  return paste_region(target, source, rect);
}

Point2 Homography::apply(Point2 p) const {
  const double u = m[0] * p.x + m[1] * p.y + m[2];
  const double v = m[3] * p.x + m[4] * p.y + m[5];
  const double z = m[6] * p.x + m[7] * p.y + m[8];
  return {u / z, v / z};
}

Homography homography_from_quads(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to) {
  if (!convex_quad(from) || !convex_quad(to)) throw ValidationError("homography: degenerate (non-convex) quad");
  const Mat3 h = mul(square_to_quad(to), adjugate(square_to_quad(from)));
  if (h[8] == 0.0) throw ValidationError("homography: singular map");
  Homography out;
  for (int i = 0; i < 9; ++i) out.m[i] = h[i] / h[8];
  return out;
}

Sample warp_perspective(const Sample& sample, const Homography& dst_to_src) { return warp_impl(sample, dst_to_src, true); }

Sample perspective(const Sample& sample, double max_jitter, std::uint64_t seed, Homography* chosen) {
  validate_sample(sample);
  if (!(max_jitter >= 0.0 && max_jitter <= 0.25)) throw ValidationError("perspective: max_jitter must lie in [0, 0.25]");
  if (max_jitter == 0.0) {
    if (chosen) *chosen = Homography{};
    return sample;
  }
  const double w = sample.image.width() - 1.0, h = sample.image.height() - 1.0;
  const std::array<Point2, 4> corners{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  Rng rng(seed);
  constexpr int kMaxTries = 32;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    std::array<Point2, 4> moved = corners;
    for (auto& p : moved) {
      p.x += rng.uniform(-max_jitter, max_jitter) * sample.image.width();
      p.y += rng.uniform(-max_jitter, max_jitter) * sample.image.height();
    }
    if (!convex_quad(moved)) continue;
    const Homography hm = homography_from_quads(moved, corners);
    if (chosen) *chosen = hm;
    return warp_impl(sample, hm, true);
  }
  throw RuntimeError("perspective: no non-degenerate corner draw after retries");
}

namespace serial {
RgbImage gaussian_blur_sigma(const RgbImage& image, double sigma, int radius) {
  return blur_impl(image, sampled_gaussian(sigma, radius), false);
}
Sample warp_perspective(const Sample& sample, const Homography& dst_to_src) {
  return warp_impl(sample, dst_to_src, false);
}
}  // namespace serial

void AugmentConfig::validate() const {
  for (double p : {p_splice, p_blur, p_occlude, p_perspective}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("augment probabilities must lie in [0,1]");
  }
  if (grids.empty()) throw ValidationError("augment: no splice grids");
  for (const auto& g : grids) {
    if (g.rows < 1 || g.cols < 1) throw ValidationError("augment: splice grid must be at least 1x1");
  }
  effective_kernel_length(blur_min);
  effective_kernel_length(blur_max);
  if (blur_min > blur_max) throw ValidationError("augment: blur_min > blur_max");
  if (!(occlusion_area.first > 0.0 && occlusion_area.first <= occlusion_area.second && occlusion_area.second < 1.0)) {
    throw ValidationError("augment: occlusion area range must lie inside (0,1)");
  }
  if (!(max_jitter >= 0.0 && max_jitter <= 0.25)) throw ValidationError("augment: max_jitter must lie in [0, 0.25]");
}

AugmentOutcome augment_sample(const Sample& sample, std::span<const Sample> pool, const AugmentConfig& config,
                              std::uint64_t seed) {
  config.validate();
  validate_sample(sample);
  Rng rng(seed);
  AugmentOutcome out{sample, {}};
  const Dims dims = sample.image.dims();

  if (rng.uniform01() < config.p_splice) {
    const SpliceGrid g = config.grids[rng.below(config.grids.size())];
    std::vector<Sample> tiles{out.sample};
    for (const auto& s : pool) {
      if (s.image.dims() == dims) tiles.push_back(s);
    }
    out.sample = splice(tiles, g, dims, rng.next_u64());
    out.trace.push_back("splice " + std::to_string(g.rows) + "x" + std::to_string(g.cols));
  }
  if (rng.uniform01() < config.p_blur) {
    const int len = config.blur_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.blur_max - config.blur_min) + 1));
    out.sample.image = gaussian_blur(out.sample.image, len);
    out.trace.push_back("blur " + std::to_string(len));
  }
  if (rng.uniform01() < config.p_occlude && !pool.empty()) {
    const Sample& source = pool[rng.below(pool.size())];
    if (source.image.dims() == dims) {
      Rect r;
      out.sample = occlude(out.sample, source, config.occlusion_area, rng.next_u64(), &r);
      out.trace.push_back("occlude " + std::to_string(r.y) + "," + std::to_string(r.x) + "," + std::to_string(r.height) +
                          "x" + std::to_string(r.width));
    }
  }
  if (rng.uniform01() < config.p_perspective) {
    out.sample = perspective(out.sample, config.max_jitter, rng.next_u64());
    out.trace.push_back(fmt("perspective %.3f", config.max_jitter));
  }
  return out;
}

}  // namespace attnmask
