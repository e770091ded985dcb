#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "vcnf/flow.hpp"
#include "vcnf/spline.hpp"

namespace vcnf::test {

/// Spline from explicit knots, bypassing decode_theta.
inline RQSpline<double> make_spline(const std::vector<double>& kx, const std::vector<double>& ky,
                                    const std::vector<double>& d) {
  RQSpline<double> p;
  p.bins = static_cast<int>(kx.size()) - 1;
  p.bound = kx.back();
  for (std::size_t i = 0; i < kx.size(); ++i) {
    p.knot_x[i] = kx[i];
    p.knot_y[i] = ky[i];
    p.deriv[i] = d[i];
  }
  return p;
}

inline RQSpline<double> random_spline(std::mt19937_64& rng, int bins, double bound, double sd = 1.0) {
  SplineConfig cfg;
  cfg.bins = bins;
  cfg.bound = bound;
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()));
  for (auto& r : raw) r = n(rng);
  return decode_theta<double>(raw, cfg);
}

inline Architecture small_arch(int dim, double horizon = 1.0) {
  Architecture a;
  a.dim = dim;
  a.horizon = horizon;
  return a;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace vcnf::test
