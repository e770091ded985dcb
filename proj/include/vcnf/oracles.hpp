#pragma once

// Reference solutions used to score trained models and to test the library.

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vcnf/distributions.hpp"
#include "vcnf/flow.hpp"
#include "vcnf/objective.hpp"
#include "vcnf/problems.hpp"

namespace vcnf {

// ---- Gaussian optimal transport ----

struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd shift;  // T(x) = A x + shift
};

/// Matrix square root of an SPD matrix (symmetric eigendecomposition).
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S);

AffineMap gaussian_ot_map(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                          const Eigen::MatrixXd& S1);

/// Squared 2-Wasserstein distance. Half of it is the OT objective.
double gaussian_w2sq(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                     const Eigen::MatrixXd& S1);

// ---- RWPO ----

/// d / beta * (log(T + 1) + 1) for V = |x|^2 / 2 and p0 = N(0, 2(T + 1)/beta I).
double rwpo_quadratic_cost(int d, double beta, double T);
double rwpo_true_density(std::span<const double> x, double t, double beta, double T);
double rwpo_true_phi(std::span<const double> x, double t, double beta, double T);

struct QuadratureSpec {
  /// Margin around the integrand's bulk: the inner grid on axis i spans
  /// [min(0, x_i) - L, max(0, x_i) + L] at spacing 2L / (n - 1).
  double L = 8.0;
  int n = 256;
  /// Gauss-Hermite nodes per axis for expectations over p0.
  int outer = 48;
  /// Largest tolerated mass fraction in the outermost 5% shell of the inner grid.
  double max_shell_fraction = 1e-8;
  void validate() const;
};

struct KernelPhi {
  double value = 0.0;
  double shell_fraction = 0.0;  // truncation diagnostic
};

/// phi(x, t) = (2/beta) log E_{y ~ N(x, 2(T-t)/beta I)} exp(-beta V(y) / 2), by trapezoid quadrature.
KernelPhi kernel_phi(std::span<const double> x, double t, double beta, double T, const Potential& V,
                     const QuadratureSpec& q);

struct KernelCost {
  double value = 0.0;
  double max_shell_fraction = 0.0;
  int nodes = 0;  // outer nodes kept
};

/// -E_{p0} phi(x, 0); p0 Gaussian or a mixture of Gaussians. Throws AccuracyError
/// when the truncation diagnostic exceeds q.max_shell_fraction.
KernelCost kernel_optimal_cost(const Distribution& p0, const Potential& V, double beta, double T,
                               const QuadratureSpec& q);

/// Gauss-Hermite rule for weight exp(-x^2): nodes ascending, weights summing to sqrt(pi).
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

// ---- Ornstein-Uhlenbeck, dx = -a x dt + sqrt(2 gamma) dW ----

double ou_variance(double t, double a, double gamma, double var0);
/// E|x_t|^2 for an isotropic start with E|x_0|^2 = m0 in d dimensions.
double ou_second_moment(double t, double a, double gamma, double m0, int d);
double ou_density(std::span<const double> x, double t, double a, double gamma, double var0);

/// Euler-Maruyama estimate of E|x_t|^2 from x_0 ~ N(0, var0 I).
Estimate ou_second_moment_em(double t, double a, double gamma, double var0, int d, int paths, double dt,
                             std::uint64_t seed);

// ---- Discrete OT ----

/// Optimal assignment for a square cost matrix (row i -> column result[i]).
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// (1/2n) min over permutations of sum |a_i - b_pi(i)|^2. Rows are points; n <= 512.
double discrete_ot_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// ---- Smiling potential ----

/// U(x) = (|x|^2 - 4)^2 / 4 + (x2 + 1)^2
double smiling_potential(std::span<const double> x);

/// div(pi v) - gamma Lap(pi) at x with pi = exp(-U), v = -grad U - delta J grad U.
double stationarity_residual(double delta, double gamma, std::span<const double> x);

// ---- Density comparison ----

using DensityFn = std::function<double(std::span<const double>)>;

/// RMSE of model vs reference density on the uniform n x n grid of [-L, L]^2 (endpoints included).
double rmse_on_grid(const FlowModel& m, double t, const DensityFn& truth, double L, int n, int threads = 0);

/// "name,inputs,value,error" with inputs already formatted.
std::string oracle_csv_row(const std::string& name, const std::string& inputs, double value, double error);

}  // namespace vcnf
