#include "attnmask/binarize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace attnmask {

ThresholdSearchSpace::ThresholdSearchSpace(std::vector<double> gammas) : gammas_(std::move(gammas)) {
  if (gammas_.empty()) throw ValidationError("threshold search space is empty");
  for (std::size_t i = 0; i < gammas_.size(); ++i) {
    if (!(gammas_[i] > 0.0 && gammas_[i] < 1.0)) throw ValidationError("threshold candidates must lie in (0,1)");
    if (i > 0 && !(gammas_[i] > gammas_[i - 1])) throw ValidationError("threshold candidates must be strictly increasing");
  }
}

ThresholdSearchSpace ThresholdSearchSpace::grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw ValidationError("invalid threshold grid");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> g;
  for (long i = 0; i <= n; ++i) {
    // Round to 12 decimals so 0.05 + 0.01*k lands on the decimal value.
    g.push_back(std::round((lo + step * static_cast<double>(i)) * 1e12) / 1e12);
  }
  return ThresholdSearchSpace(std::move(g));
}

ThresholdSearchSpace ThresholdSearchSpace::default_space() { return grid(0.05, 0.95, 0.01); }

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.dims(), b.dims(), "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool fa = a[i] != kBackground;
    const bool fb = b[i] != kBackground;
    inter += static_cast<std::size_t>(fa && fb);
    uni += static_cast<std::size_t>(fa || fb);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask threshold(const ProbabilityMap& map, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("threshold: gamma must lie in (0,1)");
  BinaryMask out(map.dims());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = map[i] >= gamma ? kForeground : kBackground;
  return out;
}

std::vector<double> threshold_scores(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space) {
  require_same_dims(map.dims(), affinity.dims(), "adaptive_threshold");
  require_binary(affinity, "adaptive_threshold affinity");
  const auto& gammas = space.gammas();
  const std::size_t levels = gammas.size();

  // Pixel with value v is fg for candidates gammas[0 .. rank(v)-1], rank(v) = #{gamma <= v}.
  // Histogram the ranks, then suffix sums give |B_gamma| and |affinity & B_gamma| for every gamma.
  std::vector<std::uint64_t> all(levels + 1, 0);
  std::vector<std::uint64_t> hit(levels + 1, 0);
  std::uint64_t affinity_fg = 0;
  const std::size_t n = map.size();

#pragma omp parallel
  {
    std::vector<std::uint64_t> local_all(levels + 1, 0);
    std::vector<std::uint64_t> local_hit(levels + 1, 0);
    std::uint64_t local_fg = 0;
#pragma omp for schedule(static) nowait
    for (std::size_t i = 0; i < n; ++i) {
      const auto rank = static_cast<std::size_t>(std::upper_bound(gammas.begin(), gammas.end(), map[i]) - gammas.begin());
      ++local_all[rank];
      if (affinity[i] == kForeground) {
        ++local_hit[rank];
        ++local_fg;
      }
    }
#pragma omp critical
    {
      for (std::size_t k = 0; k <= levels; ++k) {
        all[k] += local_all[k];
        hit[k] += local_hit[k];
      }
      affinity_fg += local_fg;
    }
  }

  std::vector<double> scores(levels);
  std::uint64_t mask_fg = 0;
  std::uint64_t inter = 0;
  for (std::size_t k = levels; k-- > 0;) {
    mask_fg += all[k + 1];
    inter += hit[k + 1];
    const std::uint64_t uni = affinity_fg + mask_fg - inter;
    scores[k] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return scores;
}

AdaptiveThreshold adaptive_threshold(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space) {
  const auto scores = threshold_scores(map, affinity, space);
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  AdaptiveThreshold out;
  out.gamma = space.gammas()[best];
  out.score = scores[best];
  out.mask = threshold(map, out.gamma);
  return out;
}

namespace serial {

AdaptiveThreshold adaptive_threshold(const ProbabilityMap& map, const AffinityMap& affinity,
                                     const ThresholdSearchSpace& space) {
  require_same_dims(map.dims(), affinity.dims(), "adaptive_threshold");
  require_binary(affinity, "adaptive_threshold affinity");
  AdaptiveThreshold out;
  bool first = true;
  for (double gamma : space.gammas()) {
    BinaryMask mask = threshold(map, gamma);
    const double score = iou(affinity, mask);
    if (first || score > out.score) {
      out.gamma = gamma;
      out.score = score;
      out.mask = std::move(mask);
      first = false;
    }
  }
  return out;
}

}  // namespace serial
}  // namespace attnmask
