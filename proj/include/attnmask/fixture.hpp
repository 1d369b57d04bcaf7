#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attnmask/attnio.hpp"
#include "attnmask/augment.hpp"

namespace attnmask {

// Procedural stand-in for a diffusion capture: one elliptical object.
struct FixtureSpec {
  int height = 128;
  int width = 128;
  std::pair<double, double> area_fraction{0.1, 0.35};  // of the ground-truth mask
  std::vector<int> resolutions{8, 16, 32, 64};          // entries larger than the image are skipped
  int timesteps = 3;
  int layers_per_resolution = 1;
  double smooth_sigma = 1.0;  // Gaussian smoothing of the downsampled indicator, in map cells
  double noise = 0.0;         // additive map noise, relative to the map peak
  double image_noise = 6.0;   // intensity std-dev added to the painted image
  double planted_gamma = 0.5;
  bool complete_tokens = false;  // also emit softmax-consistent maps for every token
  std::string class_name = "horse";
  int class_id = 13;
  int max_attempts = 64;

  void validate() const;
};

struct Fixture {
  AttentionBundle bundle;
  Sample gt;                     // mask holds class_id on the object, 0 elsewhere
  std::vector<int> class_tokens;  // token indices spelling class_name
};

// gt = threshold(aggregate(noise-free maps), planted_gamma); the image is
// painted from gt, so the planted threshold is the best one by construction.
Fixture gen_fixture(const FixtureSpec& spec, std::uint64_t seed);

}  // namespace attnmask
