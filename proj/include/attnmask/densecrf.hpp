#pragma once

#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

// Per-pixel label costs (negative log-probabilities).
struct UnaryField {
  Grid<double> background;
  Grid<double> foreground;
  Dims dims() const noexcept { return foreground.dims(); }
};

struct CrfParams {
  double w_app = 10.0;       // appearance (bilateral) kernel weight
  double theta_alpha = 80.0; // appearance kernel spatial bandwidth, pixels
  double theta_beta = 13.0;  // appearance kernel color bandwidth, 8-bit units
  double w_smooth = 3.0;     // smoothness kernel weight
  double theta_gamma = 3.0;  // smoothness kernel bandwidth, pixels
  int iterations = 5;
  double epsilon = 0.05;     // probability clamp used by unary_from_prob
  // Images with both sides <= this use the exact all-pairs sum; larger images
  // sum over a window of radius 3 * max(theta_alpha, theta_gamma).
  int exact_max_side = 96;

  void validate() const;
};

// Per-pixel label distribution after one mean-field iteration.
struct Posterior {
  Grid<double> background;
  Grid<double> foreground;
};

struct CrfResult {
  ProbabilityMap posterior;  // foreground probability
  BinaryMask mask;           // argmax, foreground on ties
};

// p' = clamp(p, eps, 1 - eps); cost_fg = -log p', cost_bg = -log(1 - p').
UnaryField unary_from_prob(const ProbabilityMap& map, double epsilon);

// Parallel mean-field inference for a two-label fully connected CRF with Potts
// compatibility. When `trace` is non-null it receives Q^0 and the posterior after
// every iteration.
CrfResult meanfield_refine(const RgbImage& image, const UnaryField& unary, const CrfParams& params,
                           std::vector<Posterior>* trace = nullptr);

// Window radius used for the pairwise sum at the given image size.
int crf_window_radius(Dims dims, const CrfParams& params);

namespace serial {
CrfResult meanfield_refine(const RgbImage& image, const UnaryField& unary, const CrfParams& params,
                           std::vector<Posterior>* trace = nullptr);
}  // namespace serial

}  // namespace attnmask
