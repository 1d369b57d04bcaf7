#include "attnmask/affinity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "attnmask/image_io.hpp"

namespace attnmask {
namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours{{{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

// Edge weights to the 8 neighbours, 0 for missing neighbours.
struct Graph {
  int height = 0;
  int width = 0;
  std::vector<std::array<double, 8>> weights;
};

Graph build_graph(const RgbImage& image, double sigma) {
  Graph g{image.height(), image.width(), std::vector<std::array<double, 8>>(image.size())};
  const double denom = 2.0 * sigma * sigma;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      auto& w = g.weights[static_cast<std::size_t>(y) * g.width + x];
      const Rgb a = image(y, x);
      for (std::size_t k = 0; k < kNeighbours.size(); ++k) {
        const int yy = y + kNeighbours[k][0];
        const int xx = x + kNeighbours[k][1];
        if (yy < 0 || yy >= g.height || xx < 0 || xx >= g.width) {
          w[k] = 0.0;
          continue;
        }
        const Rgb b = image(yy, xx);
        const double dr = static_cast<double>(a.r) - b.r, dg = static_cast<double>(a.g) - b.g, db = static_cast<double>(a.b) - b.b;
        w[k] = std::exp(-(dr * dr + dg * dg + db * db) / denom);
      }
    }
  }
  return g;
}

// Relaxes pixel (y, x) in place; returns |change|.
inline double relax(const Graph& g, Grid<double>& f, int y, int x) {
  const auto& w = g.weights[static_cast<std::size_t>(y) * g.width + x];
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < kNeighbours.size(); ++k) {
    if (w[k] == 0.0) continue;
    num += w[k] * f(y + kNeighbours[k][0], x + kNeighbours[k][1]);
    den += w[k];
  }
  if (!(den > 0.0)) return 0.0;
  const double next = num / den;
  const double change = std::abs(next - f(y, x));
  f(y, x) = next;
  return change;
}

double sweep_row_major(const Graph& g, const SeedMap& seeds, Grid<double>& f) {
  double worst = 0.0;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (seeds(y, x) == Seed::kNeutral) worst = std::max(worst, relax(g, f, y, x));
    }
  }
  return worst;
}

// Pixels sharing (y mod 2, x mod 2) are never 8-neighbours, so each colour class
// can be relaxed concurrently and the result is independent of thread count.
double sweep_four_color(const Graph& g, const SeedMap& seeds, Grid<double>& f) {
  double worst = 0.0;
  for (int py = 0; py < 2; ++py) {
    for (int px = 0; px < 2; ++px) {
#pragma omp parallel for schedule(static) reduction(max : worst)
      for (int y = py; y < g.height; y += 2) {
        for (int x = px; x < g.width; x += 2) {
          if (seeds(y, x) == Seed::kNeutral) worst = std::max(worst, relax(g, f, y, x));
        }
      }
    }
  }
  return worst;
}

}  // namespace

SeedMap extract_seeds(const ProbabilityMap& map, double hi, double lo) {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw ValidationError("extract_seeds: require 0 < lo < hi < 1");
  SeedMap seeds(map.dims(), Seed::kNeutral);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] >= hi) {
      seeds[i] = Seed::kForeground;
    } else if (map[i] <= lo) {
      seeds[i] = Seed::kBackground;
    }
  }
  return seeds;
}

PropagateResult propagate(const RgbImage& image, const SeedMap& seeds, const PropagateParams& params) {
  require_same_dims(image.dims(), seeds.dims(), "propagate");
  if (!(params.sigma_color > 0.0)) throw ValidationError("propagate: sigma_color must be > 0");
  if (!(params.tol > 0.0)) throw ValidationError("propagate: tol must be > 0");
  if (params.max_iter < 0) throw ValidationError("propagate: max_iter must be >= 0");
  const bool has_fg = std::find(seeds.begin(), seeds.end(), Seed::kForeground) != seeds.end();
  const bool has_bg = std::find(seeds.begin(), seeds.end(), Seed::kBackground) != seeds.end();
  if (!has_fg || !has_bg) throw ValidationError("propagate: need at least one FG and one BG seed");

  PropagateResult out;
  out.field = Grid<double>(seeds.dims(), 0.5);
  bool any_neutral = false;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i] == Seed::kForeground) out.field[i] = 1.0;
    if (seeds[i] == Seed::kBackground) out.field[i] = 0.0;
    any_neutral |= seeds[i] == Seed::kNeutral;
  }

  if (!any_neutral) {
    out.converged = true;
  } else {
    const Graph graph = build_graph(image, params.sigma_color);
    // Stop on an a-posteriori bound: with contraction rate rho estimated from
    // successive update sizes, the distance to the fixed point is about
    // delta * rho / (1 - rho).
    double previous = 0.0;
    for (int it = 1; it <= params.max_iter; ++it) {
      const double delta = params.order == SweepOrder::kRowMajor ? sweep_row_major(graph, seeds, out.field)
                                                                 : sweep_four_color(graph, seeds, out.field);
      out.iterations = it;
      if (delta == 0.0) {
        out.residual = 0.0;
        out.converged = true;
        break;
      }
      double estimate = delta;
      if (previous > 0.0) {
        const double rho = std::min(delta / previous, 0.999999);
        estimate = delta * rho / (1.0 - rho);
        estimate = std::max(estimate, delta * 1e-3);
      } else {
        estimate = std::numeric_limits<double>::infinity();
      }
      out.residual = estimate;
      previous = delta;
      if (estimate < params.tol) {
        out.converged = true;
        break;
      }
    }
  }

  out.mask = AffinityMap(seeds.dims());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out.field[i] = std::clamp(out.field[i], 0.0, 1.0);
    out.mask[i] = out.field[i] >= 0.5 - params.tol ? kForeground : kBackground;
  }
  return out;
}

AffinityMap load_affinity(const std::filesystem::path& path) {
  AffinityMap m = read_png_gray(path);
  require_binary(m, "load_affinity " + path.string());
  return m;
}

}  // namespace attnmask
