#include "attnmask/densecrf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace attnmask {
namespace {

constexpr int kMaxColorDist2 = 3 * 255 * 255;

// Tables factor the kernel into spatial and color parts:
//   k(i,j) = w_app * A[dy][dx] * C[|I_i - I_j|^2] + w_smooth * G[dy][dx]
struct KernelTables {
  int radius = 0;
  int stride = 0;
  std::vector<double> appearance_spatial;
  std::vector<double> smooth_spatial;
  std::vector<double> color;

  KernelTables(int radius_, const CrfParams& p) : radius(radius_), stride(radius_ + 1) {
    appearance_spatial.resize(static_cast<std::size_t>(stride) * stride);
    smooth_spatial.resize(appearance_spatial.size());
    const double a = 2.0 * p.theta_alpha * p.theta_alpha;
    const double g = 2.0 * p.theta_gamma * p.theta_gamma;
    for (int dy = 0; dy <= radius; ++dy) {
      for (int dx = 0; dx <= radius; ++dx) {
        const double d2 = static_cast<double>(dy * dy + dx * dx);
        appearance_spatial[dy * stride + dx] = p.w_app * std::exp(-d2 / a);
        smooth_spatial[dy * stride + dx] = p.w_smooth * std::exp(-d2 / g);
      }
    }
    color.resize(kMaxColorDist2 + 1);
    const double b = 2.0 * p.theta_beta * p.theta_beta;
    for (int c2 = 0; c2 <= kMaxColorDist2; ++c2) color[c2] = std::exp(-static_cast<double>(c2) / b);
  }
};

inline int color_dist2(const Rgb& a, const Rgb& b) {
  const int dr = int{a.r} - int{b.r};
  const int dg = int{a.g} - int{b.g};
  const int db = int{a.b} - int{b.b};
  return dr * dr + dg * dg + db * db;
}

// Two-label softmax of -cost, stable against large costs.
inline void softmax2(double cost_bg, double cost_fg, double& q_bg, double& q_fg) {
  const double m = std::min(cost_bg, cost_fg);
  const double e_bg = std::exp(-(cost_bg - m));
  const double e_fg = std::exp(-(cost_fg - m));
  const double z = e_bg + e_fg;
  q_bg = e_bg / z;
  q_fg = e_fg / z;
}

inline double pair_kernel(const KernelTables& t, int dy, int dx, const Rgb& a, const Rgb& b) {
  const std::size_t off = static_cast<std::size_t>(dy) * t.stride + static_cast<std::size_t>(dx);
  return t.appearance_spatial[off] * t.color[color_dist2(a, b)] + t.smooth_spatial[off];
}

// Full gather over the window: total[i] = sum_{j != i} k(i,j), fg[i] = sum_{j != i} k(i,j) Q_j(fg).
void gather_messages(const RgbImage& image, const KernelTables& t, const Grid<double>& q_fg, Grid<double>* total,
                     Grid<double>& msg_fg, bool parallel) {
  const int h = image.height();
  const int w = image.width();
  const int r = t.radius;
  const double self = t.appearance_spatial[0] * t.color[0] + t.smooth_spatial[0];
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb ci = image(y, x);
      double sum_k = 0.0;
      double sum_fg = 0.0;
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      for (int yy = y0; yy <= y1; ++yy) {
        const int dy = std::abs(yy - y);
        const double* as = t.appearance_spatial.data() + static_cast<std::size_t>(dy) * t.stride;
        const double* ss = t.smooth_spatial.data() + static_cast<std::size_t>(dy) * t.stride;
        const Rgb* img_row = image.row(yy);
        const double* qf = q_fg.row(yy);
        for (int xx = x0; xx <= x1; ++xx) {
          const int dx = std::abs(xx - x);
          const double k = as[dx] * t.color[color_dist2(ci, img_row[xx])] + ss[dx];
          sum_k += k;
          sum_fg += k * qf[xx];
        }
      }
      if (total) (*total)(y, x) = sum_k - self;
      msg_fg(y, x) = sum_fg - self * q_fg(y, x);
    }
  }
}

// Messages are linear in Q, so after the first pass only pixels whose Q moved
// contribute: msg[i] += sum_{j changed, j != i} k(i,j) * dQ_j.
void update_messages(const RgbImage& image, const KernelTables& t, const std::vector<std::size_t>& changed,
                     const std::vector<double>& delta, Grid<double>& msg_fg, bool parallel) {
  const int h = image.height();
  const int w = image.width();
  const int r = t.radius;
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb ci = image(y, x);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      double acc = 0.0;
      for (std::size_t c = 0; c < changed.size(); ++c) {
        const std::size_t j = changed[c];
        if (j == i) continue;
        const int yy = static_cast<int>(j / static_cast<std::size_t>(w));
        const int xx = static_cast<int>(j % static_cast<std::size_t>(w));
        const int dy = std::abs(yy - y);
        const int dx = std::abs(xx - x);
        if (dy > r || dx > r) continue;
        acc += pair_kernel(t, dy, dx, ci, image[j]) * delta[c];
      }
      msg_fg[i] += acc;
    }
  }
}

CrfResult refine_impl(const RgbImage& image, const UnaryField& unary, const CrfParams& params,
                      std::vector<Posterior>* trace, bool parallel) {
  params.validate();
  require_same_dims(image.dims(), unary.foreground.dims(), "meanfield_refine");
  require_same_dims(image.dims(), unary.background.dims(), "meanfield_refine");
  const Dims d = image.dims();
  const std::size_t n = d.area();

  Posterior q{Grid<double>(d), Grid<double>(d)};
  for (std::size_t i = 0; i < n; ++i) softmax2(unary.background[i], unary.foreground[i], q.background[i], q.foreground[i]);
  if (trace) trace->push_back(q);

  const bool pairwise = params.w_app > 0.0 || params.w_smooth > 0.0;
  if (params.iterations > 0 && n > 0) {
    const KernelTables tables(crf_window_radius(d, params), params);
    // total[i] = sum_j k(i,j); the background message is total - fg message since Q sums to 1.
    Grid<double> total(d, 0.0), msg_fg(d, 0.0);
    Grid<double> previous_fg = q.foreground;
    std::vector<std::size_t> changed;
    std::vector<double> delta;
    for (int it = 0; it < params.iterations; ++it) {
      if (pairwise) {
        if (it == 0) {
          gather_messages(image, tables, q.foreground, &total, msg_fg, parallel);
        } else {
          changed.clear();
          delta.clear();
          for (std::size_t j = 0; j < n; ++j) {
            const double dq = q.foreground[j] - previous_fg[j];
            if (dq != 0.0) {
              changed.push_back(j);
              delta.push_back(dq);
            }
          }
          if (changed.size() * 2 > n) {
            gather_messages(image, tables, q.foreground, nullptr, msg_fg, parallel);
          } else if (!changed.empty()) {
            update_messages(image, tables, changed, delta, msg_fg, parallel);
          }
        }
        previous_fg = q.foreground;
      }
      // Potts: a label pays for the mass its neighbours put on the other label.
#pragma omp parallel for schedule(static) if (parallel)
      for (std::size_t i = 0; i < n; ++i) {
        const double e_bg = unary.background[i] + msg_fg[i];
        const double e_fg = unary.foreground[i] + (total[i] - msg_fg[i]);
        softmax2(e_bg, e_fg, q.background[i], q.foreground[i]);
      }
      if (trace) trace->push_back(q);
    }
  }

  BinaryMask mask(d);
  Grid<double> fg(d);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = q.foreground[i] >= q.background[i] ? kForeground : kBackground;
    fg[i] = std::clamp(q.foreground[i], 0.0, 1.0);
  }
  return CrfResult{ProbabilityMap(std::move(fg)), std::move(mask)};
}

}  // namespace

void CrfParams::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(w_app) || !finite_nonneg(w_smooth)) throw ValidationError("CRF weights must be >= 0");
  if (!(theta_alpha > 0.0) || !(theta_beta > 0.0) || !(theta_gamma > 0.0)) {
    throw ValidationError("CRF bandwidths must be > 0");
  }
  if (iterations < 0) throw ValidationError("CRF iterations must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ValidationError("CRF epsilon must lie in (0, 0.5)");
  if (exact_max_side < 0) throw ValidationError("CRF exact_max_side must be >= 0");
}

int crf_window_radius(Dims dims, const CrfParams& params) {
  const int full = std::max(dims.height, dims.width);
  if (dims.height <= params.exact_max_side && dims.width <= params.exact_max_side) return full;
  const double r = std::ceil(3.0 * std::max(params.theta_alpha, params.theta_gamma));
  return std::min(full, static_cast<int>(r));
}

UnaryField unary_from_prob(const ProbabilityMap& map, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ValidationError("unary_from_prob: epsilon must lie in (0, 0.5)");
  UnaryField u{Grid<double>(map.dims()), Grid<double>(map.dims())};
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double p = std::clamp(map[i], epsilon, 1.0 - epsilon);
    u.foreground[i] = -std::log(p);
    u.background[i] = -std::log(1.0 - p);
  }
  return u;
}

CrfResult meanfield_refine(const RgbImage& image, const UnaryField& unary, const CrfParams& params,
                           std::vector<Posterior>* trace) {
  return refine_impl(image, unary, params, trace, true);
}

namespace serial {
CrfResult meanfield_refine(const RgbImage& image, const UnaryField& unary, const CrfParams& params,
                           std::vector<Posterior>* trace) {
  return refine_impl(image, unary, params, trace, false);
}
}  // namespace serial

}  // namespace attnmask
