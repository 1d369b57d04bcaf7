#pragma once

#include <span>
#include <vector>

#include "attnmask/attnio.hpp"
#include "attnmask/grid.hpp"

namespace attnmask {

// Combines the per-token aggregates of a multi-token class name.
enum class TokenReducer { kMean, kMax };

// kUpsampleThenMean: normalize -> upsample -> mean (default).
// kMeanThenUpsample: normalize -> mean per native resolution -> upsample -> weighted mean.
// Bilinear upsampling is linear, so both agree up to rounding.
enum class AggregateOrder { kUpsampleThenMean, kMeanThenUpsample };

struct AggregateOptions {
  TokenReducer reducer = TokenReducer::kMean;
  AggregateOrder order = AggregateOrder::kUpsampleThenMean;
};

// map / max(map). Throws ValidationError for negative, non-finite, or all-zero input.
ProbabilityMap normalize_map(const Grid<float>& map);

// Corner-aligned bilinear interpolation to (height, width) >= source dims.
ProbabilityMap upsample(const ProbabilityMap& map, int height, int width);

// Mean of max-normalized maps over every (layer, timestep) entry of the token
// group, upsampled to `target`, then re-normalized to max 1.
ProbabilityMap aggregate(const AttentionBundle& bundle, std::span<const int> token_group, Dims target,
                         const AggregateOptions& options = {});

namespace serial {
// Single-threaded twins of the kernels above; kept for parity tests and benchmarks.
ProbabilityMap upsample(const ProbabilityMap& map, int height, int width);
ProbabilityMap aggregate(const AttentionBundle& bundle, std::span<const int> token_group, Dims target,
                         const AggregateOptions& options = {});
}  // namespace serial

}  // namespace attnmask
