#pragma once

// Monotone rational-quadratic splines on [-B, B] with identity tails.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <utility>

#include "vcnf/autodiff.hpp"
#include "vcnf/errors.hpp"

namespace vcnf {

inline constexpr int kMaxBins = 32;

struct SplineConfig {
  int bins = 5;
  double bound = 8.0;
  /// Minimum bin width/height as a fraction of the box length 2B.
  double min_bin_fraction = 1e-3;
  double min_derivative = 1e-4;

  int raw_size() const noexcept { return 3 * bins - 1; }
  void validate() const;
};

/// softplus(identity_offset) == 1, so zero raw derivatives decode to unit slopes.
inline const double kIdentityOffset = std::log(std::exp(1.0) - 1.0);

/// Decoded knots and knot derivatives of one spline.
template <class S>
struct RQSpline {
  int bins = 0;
  double bound = 0.0;
  std::array<S, kMaxBins + 1> knot_x{};
  std::array<S, kMaxBins + 1> knot_y{};
  std::array<S, kMaxBins + 1> deriv{};
};

template <class S>
struct SplineEval {
  S value;
  S logabsdet;
};

inline void SplineConfig::validate() const {
  if (bins < 1 || bins > kMaxBins) throw ConfigError("spline: bin count must be in [1, 32]");
  if (!(bound > 0.0) || !std::isfinite(bound)) throw ConfigError("spline: bound must be positive");
  if (!(min_bin_fraction >= 0.0) || min_bin_fraction * bins >= 1.0)
    throw ConfigError("spline: min_bin_fraction * bins must be < 1");
  if (!(min_derivative > 0.0)) throw ConfigError("spline: min_derivative must be positive");
}

namespace detail {

// Softmax scaled to 2B, then bins below the minimum are pinned to it and the
// remaining bins are rescaled so the total stays exactly 2B.
template <class S>
void bin_sizes(std::span<const S> raw, double bound, double min_fraction, std::span<S> out) {
  using std::exp;
  const std::size_t k = raw.size();
  double mx = value_of(raw[0]);
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, value_of(raw[i]));
  S sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = exp(raw[i] - mx);
    sum = sum + out[i];
  }
  const S scale = (2.0 * bound) / sum;
  for (std::size_t i = 0; i < k; ++i) out[i] = out[i] * scale;

  const double min_size = min_fraction * 2.0 * bound;
  std::array<bool, kMaxBins> pinned{};
  std::size_t n_pinned = 0;
  for (std::size_t pass = 0; pass <= k; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (!pinned[i] && value_of(out[i]) < min_size) {
        pinned[i] = true;
        out[i] = S(min_size);
        ++n_pinned;
        changed = true;
      }
    }
    if (!changed) break;
    S free_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      if (!pinned[i]) free_sum = free_sum + out[i];
    const S rescale = (2.0 * bound - static_cast<double>(n_pinned) * min_size) / free_sum;
    for (std::size_t i = 0; i < k; ++i)
      if (!pinned[i]) out[i] = out[i] * rescale;
  }
}

template <class S>
struct BinTerms {
  S xk, w, yk, h, s, dk, dk1;
};

template <class S>
BinTerms<S> bin_terms(const RQSpline<S>& p, int k) {
  BinTerms<S> b{p.knot_x[k], p.knot_x[k + 1] - p.knot_x[k], p.knot_y[k],
                p.knot_y[k + 1] - p.knot_y[k], S{}, p.deriv[k], p.deriv[k + 1]};
  b.s = b.h / b.w;
  return b;
}

template <class S>
S log_slope(const BinTerms<S>& b, const S& xi) {
  using std::log;
  const S one_minus = 1.0 - xi;
  const S xi1m = xi * one_minus;
  const S den = b.s + (b.dk1 + b.dk - 2.0 * b.s) * xi1m;
  const S num = square(b.s) * (b.dk1 * square(xi) + 2.0 * b.s * xi1m + b.dk * square(one_minus));
  return log(num) - 2.0 * log(den);
}

}  // namespace detail

/// Decodes a raw parameter vector [widths(K), heights(K), derivatives(K-1)].
template <class S>
RQSpline<S> decode_theta(std::span<const S> raw, const SplineConfig& cfg) {
  using std::isfinite;
  const int k = cfg.bins;
  if (k < 1 || k > kMaxBins) throw ConfigError("decode_theta: bin count must be in [1, 32]");
  if (static_cast<int>(raw.size()) != cfg.raw_size())
    throw DecodeError("decode_theta: raw parameter vector must have length 3K-1");
  for (const auto& r : raw)
    if (!std::isfinite(value_of(r))) throw DecodeError("decode_theta: non-finite raw parameter");

  RQSpline<S> p;
  p.bins = k;
  p.bound = cfg.bound;
  std::array<S, kMaxBins> widths{}, heights{};
  const auto uk = static_cast<std::size_t>(k);
  detail::bin_sizes<S>(raw.subspan(0, uk), cfg.bound, cfg.min_bin_fraction, std::span<S>(widths.data(), uk));
  detail::bin_sizes<S>(raw.subspan(uk, uk), cfg.bound, cfg.min_bin_fraction, std::span<S>(heights.data(), uk));

  p.knot_x[0] = S(-cfg.bound);
  p.knot_y[0] = S(-cfg.bound);
  for (int i = 1; i < k; ++i) {
    p.knot_x[i] = p.knot_x[i - 1] + widths[i - 1];
    p.knot_y[i] = p.knot_y[i - 1] + heights[i - 1];
  }
  p.knot_x[k] = S(cfg.bound);
  p.knot_y[k] = S(cfg.bound);

  p.deriv[0] = S(1.0);
  p.deriv[k] = S(1.0);
  for (int i = 1; i < k; ++i)
    p.deriv[i] = max_with(softplus(raw[2 * uk + static_cast<std::size_t>(i) - 1] + kIdentityOffset),
                          cfg.min_derivative);
  return p;
}

/// Bin index for a point inside [-B, B] given knot positions.
template <class S>
int find_bin(const std::array<S, kMaxBins + 1>& knots, int bins, double v) {
  int k = 0;
  while (k + 1 < bins && value_of(knots[k + 1]) <= v) ++k;
  return k;
}

template <class S>
SplineEval<S> spline_forward(const RQSpline<S>& p, const S& x) {
  const double xv = value_of(x);
  if (!std::isfinite(xv)) throw NumericError("spline_forward: non-finite input");
  if (xv < -p.bound || xv > p.bound) return {x, S(0.0)};
  const int k = find_bin(p.knot_x, p.bins, xv);
  const auto b = detail::bin_terms(p, k);
  const S xi = (x - b.xk) / b.w;
  const S xi1m = xi * (1.0 - xi);
  const S num = b.h * (b.s * square(xi) + b.dk * xi1m);
  const S den = b.s + (b.dk1 + b.dk - 2.0 * b.s) * xi1m;
  return {b.yk + num / den, detail::log_slope(b, xi)};
}

template <class S>
SplineEval<S> spline_inverse(const RQSpline<S>& p, const S& y) {
  using std::sqrt;
  const double yv = value_of(y);
  if (!std::isfinite(yv)) throw NumericError("spline_inverse: non-finite input");
  if (yv < -p.bound || yv > p.bound) return {y, S(0.0)};
  const int k = find_bin(p.knot_y, p.bins, yv);
  const auto b = detail::bin_terms(p, k);
  const S dy = y - b.yk;
  const S curv = b.dk1 + b.dk - 2.0 * b.s;
  const S qa = b.h * (b.s - b.dk) + dy * curv;
  const S qb = b.h * b.dk - dy * curv;
  const S qc = -b.s * dy;
  const S disc = max_with(square(qb) - 4.0 * qa * qc, 0.0);
  const S xi = (2.0 * qc) / (-qb - sqrt(disc));
  return {xi * b.w + b.xk, -detail::log_slope(b, xi)};
}

}  // namespace vcnf
