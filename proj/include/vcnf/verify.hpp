#pragma once

// Self-checks of the numerical core, runnable from the command line. Each
// check reports a measured metric and the tolerance it was held to.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vcnf/flow.hpp"

namespace vcnf {

struct CheckResult {
  std::string name;
  bool pass = false;
  double metric = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

/// Model with every parameter perturbed by N(0, scale^2), so splines are far from identity.
FlowModel random_model(const Architecture& arch, std::uint64_t seed, double scale = 0.3);

/// max |f^{-1}(f(x)) - x| over random splines and points (inside and outside [-B, B]).
CheckResult check_spline_roundtrip(int cases, std::uint64_t seed);

/// max relative error of exp(logdet) vs det of a central-difference Jacobian.
CheckResult check_flow_logdet(int dim, int models, std::uint64_t seed);

/// max |integral of p(., t) - 1| by tensor trapezoid on [-L, L]^2.
CheckResult check_density_normalization(int models, std::uint64_t seed, double L = 10.0, int n = 401);

/// Reverse-mode gradient vs central differences (h = 1e-5) on random small loss
/// instances; metric is the worst relative error over checked coordinates.
/// family: "ot", "rwpo", "fp-ou" or "fp-smiling".
CheckResult check_loss_gradients(const std::string& family, int instances, std::uint64_t seed);

/// Kernel-quadrature RWPO cost vs the closed form over (d, beta, T) in {1,2} x {0.5,1} x {1,2}.
CheckResult check_kernel_vs_closed_form();

/// 2 * discrete_ot_cost vs gaussian_w2sq over random Gaussian pairs; metric in SE units.
CheckResult check_w2_vs_discrete(int pairs, int n, int replicates, std::uint64_t seed);

/// Worst scaled stationarity residual at gamma = 1.
CheckResult check_stationarity(int points, std::uint64_t seed);

/// Euler-Maruyama vs closed-form OU second moment; metric in SE units.
CheckResult check_ou_moment(std::uint64_t seed);

/// suite: spline | flow | diffkit | oracles | all
std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                          const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace vcnf
