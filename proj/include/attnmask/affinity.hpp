#pragma once

#include <cstdint>
#include <filesystem>

#include "attnmask/grid.hpp"

namespace attnmask {

enum class Seed : std::uint8_t { kBackground = 0, kForeground = 1, kNeutral = 2 };
using SeedMap = Grid<Seed>;

// FG where map >= hi, BG where map <= lo, NEUTRAL in between. Requires 0 < lo < hi < 1.
SeedMap extract_seeds(const ProbabilityMap& map, double hi, double lo);

enum class SweepOrder {
  kRowMajor,      // Gauss-Seidel in row-major order (reference, default)
  kFourColor,     // parity-coloured Gauss-Seidel; each colour class updated in parallel
};

struct PropagateParams {
  double sigma_color = 30.0;  // 8-bit color units
  double tol = 1e-4;
  int max_iter = 500;
  SweepOrder order = SweepOrder::kRowMajor;
};

struct PropagateResult {
  Grid<double> field;  // harmonic potential f in [0, 1]
  AffinityMap mask;    // f >= 0.5 (within tol of 0.5 counts as a tie -> fg)
  int iterations = 0;
  double residual = 0.0;  // estimated max distance to the fixed point at exit
  bool converged = false;
};

// Random-walk label propagation on the 8-neighbour pixel graph with weights
// w_ij = exp(-|I_i - I_j|^2 / (2 sigma_c^2)). Seeds are fixed at 1 (FG) / 0 (BG);
// neutral pixels are relaxed to the weighted mean of their neighbours.
// Non-convergence is reported in the result; the last iterate is binarized.
PropagateResult propagate(const RgbImage& image, const SeedMap& seeds, const PropagateParams& params = {});

// Reads a single-channel 8-bit PNG whose values must be 0 or 1.
AffinityMap load_affinity(const std::filesystem::path& path);

}  // namespace attnmask
