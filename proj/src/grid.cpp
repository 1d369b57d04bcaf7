#include "attnmask/grid.hpp"

#include <algorithm>
#include <cmath>

namespace attnmask {

ProbabilityMap::ProbabilityMap(Grid<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("probability map value outside [0,1]: " + std::to_string(v));
    }
  }
}

double ProbabilityMap::max() const {
  if (values_.empty()) return 0.0;
  return *std::max_element(values_.begin(), values_.end());
}

void require_binary(const BinaryMask& mask, const std::string& what) {
  for (auto v : mask) {
    if (v != kBackground && v != kForeground) {
      throw ValidationError(what + ": mask value " + std::to_string(v) + " outside {0,1}");
    }
  }
}

void require_same_dims(Dims a, Dims b, const std::string& what) {
  if (a != b) throw ValidationError(what + ": dimension mismatch " + to_string(a) + " vs " + to_string(b));
}

ProbabilityMap to_probability(const BinaryMask& mask) {
  require_binary(mask, "to_probability");
  Grid<double> g(mask.dims());
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] == kForeground ? 1.0 : 0.0;
  return ProbabilityMap(std::move(g));
}

}  // namespace attnmask
