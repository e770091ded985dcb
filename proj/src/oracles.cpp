#include "vcnf/oracles.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "vcnf/errors.hpp"

namespace vcnf {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spd_eigen(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols() || S.rows() == 0) throw ContractError("oracle: covariance must be square");
  if (!S.isApprox(S.transpose(), 1e-12)) throw ContractError("oracle: covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw ContractError("oracle: covariance must be positive definite");
  return es;
}

void check_gaussian_args(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                         const Eigen::MatrixXd& S1) {
  const auto d = mu0.size();
  if (mu1.size() != d || S0.rows() != d || S1.rows() != d) throw ContractError("oracle: dimension mismatch");
}

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S) { return spd_eigen(S).operatorSqrt(); }

AffineMap gaussian_ot_map(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                          const Eigen::MatrixXd& S1) {
  check_gaussian_args(mu0, S0, mu1, S1);
  const auto es0 = spd_eigen(S0);
  spd_eigen(S1);
  const Eigen::MatrixXd r = es0.operatorSqrt();
  const Eigen::MatrixXd ri = es0.operatorInverseSqrt();
  const Eigen::MatrixXd mid = r * S1 * r;
  Eigen::MatrixXd A = ri * spd_sqrt(0.5 * (mid + mid.transpose())) * ri;
  A = 0.5 * (A + A.transpose());
  return {A, mu1 - A * mu0};
}

double gaussian_w2sq(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                     const Eigen::MatrixXd& S1) {
  check_gaussian_args(mu0, S0, mu1, S1);
  spd_eigen(S1);
  const Eigen::MatrixXd r = spd_sqrt(S0);
  const Eigen::MatrixXd mid = r * S1 * r;
  const Eigen::MatrixXd c = spd_sqrt(0.5 * (mid + mid.transpose()));
  return (mu0 - mu1).squaredNorm() + (S0 + S1 - 2.0 * c).trace();
}

double rwpo_quadratic_cost(int d, double beta, double T) {
  if (d < 1 || !(beta > 0.0) || !(T >= 0.0)) throw ContractError("rwpo_quadratic_cost: bad arguments");
  return d / beta * (std::log(T + 1.0) + 1.0);
}

double rwpo_true_density(std::span<const double> x, double t, double beta, double T) {
  const double s = T - t + 1.0;
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return std::pow(4.0 * kPi * s / beta, -0.5 * static_cast<double>(x.size())) * std::exp(-beta * sq / (4.0 * s));
}

double rwpo_true_phi(std::span<const double> x, double t, double beta, double T) {
  const double s = T - t + 1.0;
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return static_cast<double>(x.size()) / beta * std::log(1.0 / s) - sq / (2.0 * s);
}

void QuadratureSpec::validate() const {
  if (!(L > 0.0)) throw ConfigError("quadrature: L must be positive");
  if (n < 16) throw ConfigError("quadrature: n must be >= 16");
  if (outer < 2) throw ConfigError("quadrature: outer must be >= 2");
}

KernelPhi kernel_phi(std::span<const double> x, double t, double beta, double T, const Potential& V,
                     const QuadratureSpec& q) {
  q.validate();
  const auto d = x.size();
  if (d < 1 || d > 3) throw ContractError("kernel_phi: tensor quadrature supports d <= 3");
  const double tau = T - t;
  if (tau < 0.0 || !(beta > 0.0)) throw ContractError("kernel_phi: need t <= T and beta > 0");
  if (tau == 0.0) return {-potential_eval(V, x), 0.0};

  const double h = 2.0 * q.L / (q.n - 1);
  std::vector<double> lo(d);
  std::vector<int> cnt(d);
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = std::min(0.0, x[i]) - q.L;
    const double hi = std::max(0.0, x[i]) + q.L;
    cnt[i] = static_cast<int>(std::ceil((hi - lo[i]) / h)) + 1;
    total *= static_cast<std::size_t>(cnt[i]);
  }

  // Log integrand on the grid; trapezoid end weights are irrelevant once the
  // shell check passes, so plain Riemann weights h^d are used.
  std::vector<double> logf(total);
  std::vector<char> shell(total, 0);
  std::vector<double> y(d);
  const double k = beta / (4.0 * tau);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    double dist = 0.0;
    bool edge = false;
    for (std::size_t i = 0; i < d; ++i) {
      const int j = static_cast<int>(r % static_cast<std::size_t>(cnt[i]));
      r /= static_cast<std::size_t>(cnt[i]);
      y[i] = lo[i] + j * h;
      dist += (x[i] - y[i]) * (x[i] - y[i]);
      const int band = std::max(1, static_cast<int>(std::ceil(0.05 * (cnt[i] - 1))));
      edge = edge || j < band || j > cnt[i] - 1 - band;
    }
    logf[flat] = -0.5 * beta * potential_eval(V, y) - k * dist;
    shell[flat] = edge ? 1 : 0;
  }
  const double lse = log_sum_exp(logf);
  double shell_mass = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    if (shell[i]) shell_mass += std::exp(logf[i] - lse);

  const double log_norm = -0.5 * static_cast<double>(d) * std::log(4.0 * kPi * tau / beta);
  const double log_int = lse + static_cast<double>(d) * std::log(h) + log_norm;
  return {2.0 / beta * log_int, shell_mass};
}

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ContractError("gauss_hermite: n must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = std::sqrt(kPi) * v0 * v0;
  }
}

KernelCost kernel_optimal_cost(const Distribution& p0, const Potential& V, double beta, double T,
                               const QuadratureSpec& q) {
  q.validate();
  std::vector<std::pair<double, const Gaussian*>> comps;
  if (const auto* g = p0.gaussian()) {
    comps.emplace_back(1.0, g);
  } else {
    const auto* mix = p0.mixture();
    for (std::size_t i = 0; i < mix->components().size(); ++i)
      comps.emplace_back(mix->weights()[i], &mix->components()[i]);
  }
  const int d = p0.dim();
  if (d > 3) throw ContractError("kernel_optimal_cost: d <= 3");

  std::vector<double> gx, gw;
  gauss_hermite(q.outer, gx, gw);

  // Outer nodes x = mu + sqrt(2) L xi with weight pi^{-d/2} prod w; negligible ones dropped.
  struct Node {
    std::vector<double> x;
    double w;
  };
  std::vector<Node> nodes;
  for (const auto& [cw, g] : comps) {
    const Eigen::MatrixXd Lc = g->cov().llt().matrixL();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::size_t count = 1;
    for (int i = 0; i < d; ++i) count *= static_cast<std::size_t>(q.outer);
    for (std::size_t flat = 0; flat < count; ++flat) {
      std::size_t r = flat;
      Eigen::VectorXd xi(d);
      double w = cw * std::pow(kPi, -0.5 * d);
      for (int i = 0; i < d; ++i) {
        const auto j = r % static_cast<std::size_t>(q.outer);
        r /= static_cast<std::size_t>(q.outer);
        xi(i) = gx[j];
        w *= gw[j];
      }
      if (w < 1e-15) continue;
      const Eigen::VectorXd x = g->mean() + std::sqrt(2.0) * Lc * xi;
      nodes.push_back({std::vector<double>(x.data(), x.data() + d), w});
    }
  }

  std::vector<KernelPhi> phi(nodes.size());
  const int n = static_cast<int>(nodes.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) phi[static_cast<std::size_t>(i)] = kernel_phi(nodes[static_cast<std::size_t>(i)].x, 0.0, beta, T, V, q);

  KernelCost out;
  out.nodes = n;
  double wsum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out.value -= nodes[i].w * phi[i].value;
    wsum += nodes[i].w;
    out.max_shell_fraction = std::max(out.max_shell_fraction, phi[i].shell_fraction);
  }
  out.value /= wsum;
  if (out.max_shell_fraction > q.max_shell_fraction) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "kernel_optimal_cost: truncation diagnostic %.3g exceeds %.3g; enlarge L",
                  out.max_shell_fraction, q.max_shell_fraction);
    throw AccuracyError(buf);
  }
  return out;
}

double ou_variance(double t, double a, double gamma, double var0) {
  if (!(a > 0.0)) throw ContractError("ou: a must be positive");
  const double s = gamma / a;
  return s + (var0 - s) * std::exp(-2.0 * a * t);
}

double ou_second_moment(double t, double a, double gamma, double m0, int d) {
  if (d < 1) throw ContractError("ou: d must be >= 1");
  return d * ou_variance(t, a, gamma, m0 / d);
}

double ou_density(std::span<const double> x, double t, double a, double gamma, double var0) {
  const double v = ou_variance(t, a, gamma, var0);
  double sq = 0.0;
  for (double c : x) sq += c * c;
  return std::pow(2.0 * kPi * v, -0.5 * static_cast<double>(x.size())) * std::exp(-0.5 * sq / v);
}

Estimate ou_second_moment_em(double t, double a, double gamma, double var0, int d, int paths, double dt,
                             std::uint64_t seed) {
  if (!(a > 0.0) || d < 1 || paths < 2 || !(dt > 0.0)) throw ContractError("ou_second_moment_em: bad arguments");
  const int steps = static_cast<int>(std::lround(t / dt));
  const double h = steps > 0 ? t / steps : 0.0;
  constexpr int kChunk = 1024;
  const int chunks = (paths + kChunk - 1) / kChunk;
  std::vector<double> sum(static_cast<std::size_t>(chunks)), sq(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < chunks; ++c) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(c));
    std::normal_distribution<double> normal;
    const int n = std::min(kChunk, paths - c * kChunk);
    std::vector<double> x(static_cast<std::size_t>(n * d));
    for (auto& v : x) v = std::sqrt(var0) * normal(rng);
    const double noise = std::sqrt(2.0 * gamma * h);
    for (int s = 0; s < steps; ++s)
      for (auto& v : x) v += -a * v * h + noise * normal(rng);
    double s1 = 0.0, s2 = 0.0;
    for (int p = 0; p < n; ++p) {
      double r = 0.0;
      for (int i = 0; i < d; ++i) r += x[static_cast<std::size_t>(p * d + i)] * x[static_cast<std::size_t>(p * d + i)];
      s1 += r;
      s2 += r * r;
    }
    sum[static_cast<std::size_t>(c)] = s1;
    sq[static_cast<std::size_t>(c)] = s2;
  }
  double s1 = 0.0, s2 = 0.0;
  for (int c = 0; c < chunks; ++c) {
    s1 += sum[static_cast<std::size_t>(c)];
    s2 += sq[static_cast<std::size_t>(c)];
  }
  const double mean = s1 / paths;
  const double var = (s2 - s1 * s1 / paths) / (paths - 1);
  return {mean, std::sqrt(var / paths)};
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  // Potentials-based O(n^3) assignment (1-indexed internally).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ContractError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) match[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return match;
}

double discrete_ot_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const auto n = a.rows();
  if (b.rows() != n || a.cols() != b.cols()) throw ContractError("discrete_ot_cost: sample sets must match in shape");
  if (n < 1 || n > 512) throw ContractError("discrete_ot_cost: need 1 <= n <= 512");
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  const auto m = hungarian(c);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += c(i, m[static_cast<std::size_t>(i)]);
  return 0.5 * s / static_cast<double>(n);
}

double smiling_potential(std::span<const double> x) {
  if (x.size() != 2) throw ContractError("smiling potential is two-dimensional");
  const double r = x[0] * x[0] + x[1] * x[1] - 4.0;
  return 0.25 * r * r + (x[1] + 1.0) * (x[1] + 1.0);
}

double stationarity_residual(double delta, double gamma, std::span<const double> x) {
  if (x.size() != 2) throw ContractError("stationarity_residual: d = 2");
  const double x1 = x[0], x2 = x[1];
  const double r = x1 * x1 + x2 * x2 - 4.0;
  const double U1 = x1 * r, U2 = x2 * r + 2.0 * (x2 + 1.0);
  const double U11 = r + 2.0 * x1 * x1, U22 = r + 2.0 * x2 * x2 + 2.0;
  const double U12 = 2.0 * x1 * x2, U21 = 2.0 * x2 * x1;
  const double pi = std::exp(-smiling_potential(x));

  // v = -grad U - delta J grad U, J = [[0, 1], [-1, 0]]
  const double v1 = -U1 - delta * U2;
  const double v2 = -U2 + delta * U1;
  const double div_v = -U11 - delta * U21 - U22 + delta * U12;
  // grad pi = -pi grad U; Lap pi = pi (|grad U|^2 - Lap U)
  const double div_pi_v = pi * div_v - pi * (U1 * v1 + U2 * v2);
  const double lap_pi = pi * (U1 * U1 + U2 * U2 - U11 - U22);
  return div_pi_v - gamma * lap_pi;
}

double rmse_on_grid(const FlowModel& m, double t, const DensityFn& truth, double L, int n, int threads) {
  if (m.dim() != 2) throw ContractError("rmse_on_grid: d = 2");
  if (n < 2 || !(L > 0.0)) throw ContractError("rmse_on_grid: bad grid");
  const double h = 2.0 * L / (n - 1);
  // Reject references that are far from normalized on the box.
  std::vector<double> rows(static_cast<std::size_t>(n)), mass(static_cast<std::size_t>(n));
  const FlowAt<double> at(m, t);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (int i = 0; i < n; ++i) {
    double s = 0.0, ms = 0.0;
    std::array<double, 2> x{-L + i * h, 0.0};
    for (int j = 0; j < n; ++j) {
      x[1] = -L + j * h;
      const double pt = truth(x);
      const double pm = std::exp(at.log_density(std::span<const double>(x)));
      s += (pm - pt) * (pm - pt);
      ms += pt;
    }
    rows[static_cast<std::size_t>(i)] = s;
    mass[static_cast<std::size_t>(i)] = ms;
  }
  double s = 0.0, ms = 0.0;
  for (int i = 0; i < n; ++i) {
    s += rows[static_cast<std::size_t>(i)];
    ms += mass[static_cast<std::size_t>(i)];
  }
  if (!std::isfinite(ms) || std::abs(ms * h * h - 1.0) > 0.1)
    throw ContractError("rmse_on_grid: reference density is not normalized on the box");
  return std::sqrt(s / (static_cast<double>(n) * n));
}

std::string oracle_csv_row(const std::string& name, const std::string& inputs, double value, double error) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g,%.6g", value, error);
  return name + ",\"" + inputs + "\"," + buf;
}

}  // namespace vcnf
