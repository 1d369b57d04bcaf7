#pragma once

#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

// Candidate thresholds: strictly increasing, non-empty, each in (0, 1).
class ThresholdSearchSpace {
 public:
  explicit ThresholdSearchSpace(std::vector<double> gammas);
  // lo, lo + step, ..., hi (inclusive), generated as integer multiples to avoid drift.
  static ThresholdSearchSpace grid(double lo, double hi, double step);
  // {0.05, 0.06, ..., 0.95}.
  static ThresholdSearchSpace default_space();

  const std::vector<double>& gammas() const noexcept { return gammas_; }
  std::size_t size() const noexcept { return gammas_.size(); }

 private:
  std::vector<double> gammas_;
};

// |a & b| / |a | b|; two empty masks score 1.
double iou(const BinaryMask& a, const BinaryMask& b);

// fg iff map >= gamma; gamma must lie in (0, 1).
BinaryMask threshold(const ProbabilityMap& map, double gamma);

struct AdaptiveThreshold {
  double gamma = 0.0;
  double score = 0.0;  // IoU against the affinity map at gamma
  BinaryMask mask;
};

// argmax over the search space of iou(affinity, threshold(map, gamma)); ties go
// to the smallest gamma.
AdaptiveThreshold adaptive_threshold(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space);

// IoU for every gamma in the space, in space order.
std::vector<double> threshold_scores(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space);

namespace serial {
// Direct scan: thresholds the map once per candidate.
AdaptiveThreshold adaptive_threshold(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space);
}  // namespace serial

}  // namespace attnmask
