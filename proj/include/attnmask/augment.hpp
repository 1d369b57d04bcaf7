#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

// Image with its pixel-aligned class-id mask (255 = ignore).
struct Sample {
  RgbImage image;
  SegMask mask;
  friend bool operator==(const Sample&, const Sample&) = default;
};

void validate_sample(const Sample& sample);

struct SpliceGrid {
  int rows = 1;
  int cols = 1;
  friend bool operator==(const SpliceGrid&, const SpliceGrid&) = default;
};

inline constexpr std::array<SpliceGrid, 6> kSpliceGrids{{{1, 2}, {2, 1}, {2, 2}, {3, 3}, {5, 5}, {8, 8}}};

// Half-pixel-centred resampling: bilinear for images, nearest for masks.
RgbImage resize_bilinear(const RgbImage& image, Dims out);
SegMask resize_nearest(const SegMask& mask, Dims out);

// Tiles rows x cols cells; cell (r, c) shows samples[picks[r * cols + c]] resized
// to the cell. Cells use floor sizes; the last row/column absorbs the remainder.
Sample splice_with(std::span<const Sample> samples, SpliceGrid grid, Dims out, std::span<const std::size_t> picks);
// Picks drawn uniformly with replacement from a seeded stream.
Sample splice(std::span<const Sample> samples, SpliceGrid grid, Dims out, std::uint64_t seed);

// Lengths outside [6, 22] are rejected; even lengths are promoted to the next odd.
int effective_kernel_length(int kernel_len);
double kernel_sigma(int effective_len);
// Normalized discrete Gaussian of the effective length.
std::vector<double> gaussian_kernel(int kernel_len);
RgbImage gaussian_blur(const RgbImage& image, int kernel_len);
// Separable blur with an explicit sigma and radius; reflect-101 borders.
RgbImage gaussian_blur_sigma(const RgbImage& image, double sigma, int radius);

struct Rect {
  int y = 0;
  int x = 0;
  int height = 0;
  int width = 0;
};

// Copies image and mask pixels of `source` inside `rect` onto `target`.
Sample paste_region(const Sample& target, const Sample& source, Rect rect);
// CutMix-style occlusion: area fraction ~ U(area_range), position uniform.
Sample occlude(const Sample& target, const Sample& source, std::pair<double, double> area_range, std::uint64_t seed,
               Rect* chosen = nullptr);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// 3x3 projective map, row-major, normalized so m[8] == 1.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Point2 apply(Point2 p) const;
};

// Maps from[i] to to[i] for i = 0..3 (corners in order around the quad).
// Throws ValidationError for degenerate quads.
Homography homography_from_quads(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to);

// Resamples through `dst_to_src`: image bilinear, mask nearest; pixels whose
// source falls outside the frame become black / 255.
Sample warp_perspective(const Sample& sample, const Homography& dst_to_src);

// Jitters the four output corners by up to max_jitter * dims and warps.
Sample perspective(const Sample& sample, double max_jitter, std::uint64_t seed, Homography* chosen = nullptr);

namespace serial {
RgbImage gaussian_blur_sigma(const RgbImage& image, double sigma, int radius);
Sample warp_perspective(const Sample& sample, const Homography& dst_to_src);
}  // namespace serial

struct AugmentConfig {
  double p_splice = 0.5;
  double p_blur = 0.5;
  double p_occlude = 0.5;
  double p_perspective = 0.5;
  std::vector<SpliceGrid> grids{kSpliceGrids.begin(), kSpliceGrids.end()};
  int blur_min = 6;
  int blur_max = 22;
  std::pair<double, double> occlusion_area{0.1, 0.4};
  double max_jitter = 0.15;

  void validate() const;
};

struct AugmentOutcome {
  Sample sample;
  std::vector<std::string> trace;  // applied ops with their drawn parameters
};

// Applies splice -> blur -> occlude -> perspective, each with its probability.
// `pool` supplies splice tiles and occlusion sources.
AugmentOutcome augment_sample(const Sample& sample, std::span<const Sample> pool, const AugmentConfig& config,
                              std::uint64_t seed);

}  // namespace attnmask
