#pragma once

// Mean-field control problem instances: optimal transport (OT), regularized
// Wasserstein proximal operator (RWPO) and Fokker-Planck flow matching.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vcnf/autodiff.hpp"
#include "vcnf/distributions.hpp"
#include "vcnf/errors.hpp"

namespace vcnf {

/// V(x) = |x|^2 / 2
struct QuadraticPotential {};

/// V(x) = ((x1 - a)^2 + (x2 + a)^2)((x1 + a)^2 + (x2 - a)^2) / 4, wells at (a, -a) and (-a, a).
struct DoubleWellPotential {
  double a = 1.0;
};

using Potential = std::variant<QuadraticPotential, DoubleWellPotential>;

/// b(x) = -a x
struct OUDrift {
  double a = 1.0;
};

/// b(x) = -grad U - delta J grad U with U = (|x|^2 - 4)^2 / 4 + (x2 + 1)^2 and J = [[0, 1], [-1, 0]].
struct SmilingDrift {
  double delta = 0.5;
};

using DriftField = std::variant<OUDrift, SmilingDrift>;

template <class S>
S potential_eval(const Potential& V, std::span<const S> x) {
  if (const auto* dw = std::get_if<DoubleWellPotential>(&V)) {
    if (x.size() != 2) throw ContractError("double-well potential is two-dimensional");
    const double a = dw->a;
    const S f1 = square(x[0] - a) + square(x[1] + a);
    const S f2 = square(x[0] + a) + square(x[1] - a);
    return f1 * f2 * 0.25;
  }
  S acc = 0.0;
  for (const auto& v : x) acc = acc + square(v);
  return 0.5 * acc;
}

template <class S>
std::vector<S> drift_eval(const DriftField& b, std::span<const S> x) {
  std::vector<S> out(x.size());
  if (const auto* ou = std::get_if<OUDrift>(&b)) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -ou->a * x[i];
    return out;
  }
  if (x.size() != 2) throw ContractError("smiling drift is two-dimensional");
  const double delta = std::get<SmilingDrift>(b).delta;
  const S r = square(x[0]) + square(x[1]) - 4.0;
  out[0] = -((x[0] + delta * x[1]) * r + 2.0 * delta * (x[1] + 1.0));
  out[1] = -((x[1] - delta * x[0]) * r + 2.0 * (x[1] + 1.0));
  return out;
}

double potential_eval(const Potential& V, std::span<const double> x);
std::vector<double> drift_eval(const DriftField& b, std::span<const double> x);

using AnalyticDensity = std::function<double(std::span<const double> x, double t)>;

struct OTProblem {
  Distribution p0;
  Distribution p1;
};

struct RWPOProblem {
  Distribution p0;
  Potential potential;
  double beta = 1.0;
  double horizon = 1.0;
};

struct FPMatchProblem {
  Distribution p0;
  DriftField drift;
  double gamma = 1.0;
  double horizon = 1.0;
  std::optional<AnalyticDensity> reference;
};

class ProblemSpec {
 public:
  ProblemSpec(OTProblem p) : v_(std::move(p)) { validate(); }       // NOLINT(google-explicit-constructor)
  ProblemSpec(RWPOProblem p) : v_(std::move(p)) { validate(); }     // NOLINT(google-explicit-constructor)
  ProblemSpec(FPMatchProblem p) : v_(std::move(p)) { validate(); }  // NOLINT(google-explicit-constructor)

  double horizon() const;
  int dim() const;
  std::string kind() const;
  const Distribution& initial() const;

  const OTProblem* ot() const noexcept { return std::get_if<OTProblem>(&v_); }
  const RWPOProblem* rwpo() const noexcept { return std::get_if<RWPOProblem>(&v_); }
  const FPMatchProblem* fp() const noexcept { return std::get_if<FPMatchProblem>(&v_); }

 private:
  void validate() const;
  std::variant<OTProblem, RWPOProblem, FPMatchProblem> v_;
};

}  // namespace vcnf
