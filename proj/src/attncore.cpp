#include "attnmask/attncore.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace attnmask {
namespace {

struct Axis {
  std::vector<int> lo;
  std::vector<double> frac;
};

// Corner alignment: output index i samples source coordinate i * (n_src - 1) / (n_dst - 1).
Axis make_axis(int n_src, int n_dst) {
  Axis a;
  a.lo.resize(n_dst);
  a.frac.resize(n_dst);
  for (int i = 0; i < n_dst; ++i) {
    if (n_src == 1 || n_dst == 1) {
      a.lo[i] = 0;
      a.frac[i] = 0.0;
      continue;
    }
    const double pos = static_cast<double>(i) * (n_src - 1) / (n_dst - 1);
    int lo = static_cast<int>(std::floor(pos));
    lo = std::clamp(lo, 0, n_src - 2);
    a.lo[i] = lo;
    a.frac[i] = pos - lo;
  }
  return a;
}

void check_upsample(const ProbabilityMap& map, int height, int width) {
  if (map.size() == 0) throw ValidationError("upsample: empty map");
  if (height < map.height() || width < map.width()) {
    throw ValidationError("upsample: downsampling request " + to_string(map.dims()) + " -> " +
                          to_string(Dims{height, width}));
  }
}

inline double sample(const Grid<double>& src, const Axis& ay, const Axis& ax, int y, int x) {
  const int y0 = ay.lo[y];
  const int x0 = ax.lo[x];
  const int y1 = std::min(y0 + 1, src.height() - 1);
  const int x1 = std::min(x0 + 1, src.width() - 1);
  const double fy = ay.frac[y];
  const double fx = ax.frac[x];
  const double top = src(y0, x0) * (1.0 - fx) + src(y0, x1) * fx;
  const double bottom = src(y1, x0) * (1.0 - fx) + src(y1, x1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

Grid<double> upsample_grid(const Grid<double>& src, int height, int width, bool parallel) {
  const Axis ay = make_axis(src.height(), height);
  const Axis ax = make_axis(src.width(), width);
  Grid<double> out(height, width);
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < height; ++y) {
    double* row = out.row(y);
    for (int x = 0; x < width; ++x) row[x] = sample(src, ay, ax, y, x);
  }
  return out;
}

// Interpolation can overshoot [0,1] by an ulp; clamp before wrapping.
ProbabilityMap wrap(Grid<double> g) {
  for (auto& v : g) v = std::clamp(v, 0.0, 1.0);
  return ProbabilityMap(std::move(g));
}

Grid<double> normalized_grid(const Grid<float>& map) {
  double peak = 0.0;
  for (float v : map) {
    if (!std::isfinite(v) || v < 0.0f) throw ValidationError("normalize_map: map must be finite and non-negative");
    peak = std::max(peak, static_cast<double>(v));
  }
  if (!(peak > 0.0)) throw ValidationError("normalize_map: degenerate (all-zero) map");
  Grid<double> out(map.dims());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = static_cast<double>(map[i]) / peak;
  return out;
}

Grid<double> token_aggregate(const AttentionBundle& bundle, int token, Dims target, AggregateOrder order,
                             bool parallel) {
  std::vector<const AttentionEntry*> entries;
  for (const auto& e : bundle.entries) {
    if (e.token_index == token) entries.push_back(&e);
  }
  if (entries.empty()) throw ValidationError("aggregate: no entries for token " + std::to_string(token));
  // Fixed accumulation order keeps the result independent of entry order up to rounding.
  std::stable_sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
    return std::tie(a->layer_id, a->timestep) < std::tie(b->layer_id, b->timestep);
  });

  Grid<double> acc(target, 0.0);
  const double n = static_cast<double>(entries.size());
  if (order == AggregateOrder::kUpsampleThenMean) {
    for (const auto* e : entries) {
      const Grid<double> up = upsample_grid(normalized_grid(e->map), target.height, target.width, parallel);
#pragma omp parallel for schedule(static) if (parallel)
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += up[i];
    }
  } else {
    std::map<std::pair<int, int>, std::pair<Grid<double>, int>> by_res;
    for (const auto* e : entries) {
      auto key = std::make_pair(e->map.height(), e->map.width());
      auto [it, inserted] = by_res.try_emplace(key, Grid<double>(e->map.dims(), 0.0), 0);
      const Grid<double> g = normalized_grid(e->map);
      for (std::size_t i = 0; i < g.size(); ++i) it->second.first[i] += g[i];
      ++it->second.second;
    }
    for (const auto& [key, sum] : by_res) {
      const Grid<double> up = upsample_grid(sum.first, target.height, target.width, parallel);
#pragma omp parallel for schedule(static) if (parallel)
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += up[i];
    }
  }
  for (auto& v : acc) v /= n;
  return acc;
}

ProbabilityMap aggregate_impl(const AttentionBundle& bundle, std::span<const int> token_group, Dims target,
                              const AggregateOptions& options, bool parallel) {
  if (token_group.empty()) throw ValidationError("aggregate: empty token group");
  if (target.height <= 0 || target.width <= 0) throw ValidationError("aggregate: empty target");
  for (const auto& e : bundle.entries) {
    if (e.map.height() > target.height || e.map.width() > target.width) {
      throw ValidationError("aggregate: target " + to_string(target) + " smaller than entry " + to_string(e.map.dims()));
    }
  }

  Grid<double> combined;
  for (std::size_t k = 0; k < token_group.size(); ++k) {
    Grid<double> g = token_aggregate(bundle, token_group[k], target, options.order, parallel);
    if (k == 0) {
      combined = std::move(g);
    } else if (options.reducer == TokenReducer::kMean) {
      for (std::size_t i = 0; i < g.size(); ++i) combined[i] += g[i];
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) combined[i] = std::max(combined[i], g[i]);
    }
  }
  if (options.reducer == TokenReducer::kMean) {
    for (auto& v : combined) v /= static_cast<double>(token_group.size());
  }
  const double peak = *std::max_element(combined.begin(), combined.end());
  if (!(peak > 0.0)) throw ValidationError("aggregate: degenerate aggregate");
  for (auto& v : combined) v /= peak;
  return wrap(std::move(combined));
}

}  // namespace

ProbabilityMap normalize_map(const Grid<float>& map) {
  if (map.empty()) throw ValidationError("normalize_map: empty map");
  return wrap(normalized_grid(map));
}

ProbabilityMap upsample(const ProbabilityMap& map, int height, int width) {
  check_upsample(map, height, width);
  if (map.height() == height && map.width() == width) return map;
  return wrap(upsample_grid(map.grid(), height, width, true));
}

ProbabilityMap aggregate(const AttentionBundle& bundle, std::span<const int> token_group, Dims target,
                         const AggregateOptions& options) {
  return aggregate_impl(bundle, token_group, target, options, true);
}

namespace serial {

ProbabilityMap upsample(const ProbabilityMap& map, int height, int width) {
  check_upsample(map, height, width);
  if (map.height() == height && map.width() == width) return map;
  return wrap(upsample_grid(map.grid(), height, width, false));
}

ProbabilityMap aggregate(const AttentionBundle& bundle, std::span<const int> token_group, Dims target,
                         const AggregateOptions& options) {
  return aggregate_impl(bundle, token_group, target, options, false);
}

}  // namespace serial
}  // namespace attnmask
