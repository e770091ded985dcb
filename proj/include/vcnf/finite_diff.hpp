#pragma once

// Central-difference velocity and score estimators.

#include <span>
#include <vector>

#include "vcnf/flow.hpp"

namespace vcnf {

/// (f(z, t + dt/2) - f(z, t - dt/2)) / dt given the two time slices.
template <class S>
std::vector<S> velocity_fd(const FlowAt<S>& plus, const FlowAt<S>& minus, std::span<const S> z,
                           double dt) {
  const auto fp = plus.forward(z);
  const auto fm = minus.forward(z);
  std::vector<S> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = (fp.x[i] - fm.x[i]) / dt;
  return v;
}

/// Component i: (log p(x + dx e_i / 2) - log p(x - dx e_i / 2)) / dx.
template <class S>
std::vector<S> score_fd(const FlowAt<S>& at, std::span<const S> x, double dx) {
  std::vector<S> s(x.size());
  std::vector<S> xp(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + 0.5 * dx;
    const S hi = at.log_density(xp);
    xp[i] = x[i] - 0.5 * dx;
    const S lo = at.log_density(xp);
    xp[i] = x[i];
    s[i] = (hi - lo) / dx;
  }
  return s;
}

std::vector<double> velocity_fd(const FlowModel& m, std::span<const double> z, double t, double dt);
std::vector<double> score_fd(const FlowModel& m, std::span<const double> x, double t, double dx);

}  // namespace vcnf
