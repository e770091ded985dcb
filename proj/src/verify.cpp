#include "vcnf/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "vcnf/loss.hpp"
#include "vcnf/oracles.hpp"

namespace vcnf {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

CheckResult finish(std::string name, double metric, double tol, Clock::time_point t0, std::string detail = {}) {
  return {std::move(name), metric <= tol, metric, tol, since(t0), std::move(detail)};
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace

FlowModel random_model(const Architecture& arch, std::uint64_t seed, double scale) {
  FlowModel m(arch, seed);
  auto rng = make_stream(seed, 99);
  std::normal_distribution<double> n(0.0, scale);
  auto p = m.mutable_params();
  for (auto& v : p) v += n(rng);
  m.set_params(std::move(p));
  return m;
}

CheckResult check_spline_roundtrip(int cases, std::uint64_t seed) {
  const auto t0 = Clock::now();
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> raw(0.0, 1.0);
  std::uniform_int_distribution<int> bins(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  constexpr int kPointsPerSpline = 20;
  for (int c = 0; c < cases; c += kPointsPerSpline) {
    SplineConfig cfg;
    cfg.bins = bins(rng);
    cfg.bound = 1.0 + 9.0 * u(rng);
    std::vector<double> theta(static_cast<std::size_t>(cfg.raw_size()));
    for (auto& v : theta) v = raw(rng);
    const auto s = decode_theta<double>(theta, cfg);
    for (int k = 0; k < kPointsPerSpline && c + k < cases; ++k) {
      const double x = (2.4 * u(rng) - 1.2) * cfg.bound;
      const auto f = spline_forward(s, x);
      const auto b = spline_inverse(s, f.value);
      worst = std::max(worst, std::abs(b.value - x));
    }
  }
  return finish("spline-roundtrip", worst, 1e-10, t0, std::to_string(cases) + " cases");
}

CheckResult check_flow_logdet(int dim, int models, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Architecture arch;
  arch.dim = dim;
  auto rng = make_stream(seed, 1);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < models; ++k) {
    const auto m = random_model(arch, seed + 1000 + static_cast<std::uint64_t>(k));
    const double t = ut(rng);
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (auto& v : z) v = 1.5 * normal(rng);
    const auto f = flow_forward(m, z, t);
    Eigen::MatrixXd J(dim, dim);
    // Five-point stencil, O(h^4).
    for (int j = 0; j < dim; ++j) {
      auto at = [&](double off) {
        auto zz = z;
        zz[static_cast<std::size_t>(j)] += off;
        return flow_forward(m, zz, t).x;
      };
      const auto p2 = at(2 * h), p1 = at(h), m1 = at(-h), m2 = at(-2 * h);
      for (int i = 0; i < dim; ++i) {
        const auto u = static_cast<std::size_t>(i);
        J(i, j) = (-p2[u] + 8 * p1[u] - 8 * m1[u] + m2[u]) / (12 * h);
      }
    }
    const double det = std::abs(J.determinant());
    worst = std::max(worst, std::abs(det - std::exp(f.logdet)) / std::exp(f.logdet));
  }
  return finish("flow-logdet-d" + std::to_string(dim), worst, 1e-5, t0, std::to_string(models) + " models");
}

CheckResult check_density_normalization(int models, std::uint64_t seed, double L, int n) {
  const auto t0 = Clock::now();
  Architecture arch;
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  auto rng = make_stream(seed, 2);
  const double h = 2.0 * L / (n - 1);
  double worst = 0.0;
  for (int k = 0; k < models; ++k) {
    const auto m = random_model(arch, seed + 2000 + static_cast<std::uint64_t>(k), 0.1);
    const FlowAt<double> at(m, ut(rng));
    std::vector<double> rows(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
        const std::array<double, 2> x{-L + i * h, -L + j * h};
        s += wj * std::exp(at.log_density(x));
      }
      rows[static_cast<std::size_t>(i)] = wi * s;
    }
    const double mass = std::accumulate(rows.begin(), rows.end(), 0.0) * h * h;
    worst = std::max(worst, std::abs(mass - 1.0));
  }
  return finish("density-normalization", worst, 1e-3, t0, std::to_string(models) + " models");
}

namespace {

ProblemSpec gradient_family(const std::string& family) {
  if (family == "ot") {
    Eigen::Matrix2d S0;
    S0 << 4, 1.5, 1.5, 3;
    return OTProblem{Gaussian(Eigen::Vector2d(-1, -1), S0), Gaussian(Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity())};
  }
  if (family == "rwpo") return RWPOProblem{Gaussian::isotropic(2, 4.0), QuadraticPotential{}, 1.0, 1.0};
  if (family == "rwpo-double-well") return RWPOProblem{Gaussian::isotropic(2, 0.8), DoubleWellPotential{1.0}, 5.0, 2.0};
  if (family == "fp-ou") return FPMatchProblem{Gaussian::isotropic(2, 4.0), OUDrift{1.0}, 0.5, 1.0, {}};
  if (family == "fp-smiling") return FPMatchProblem{Gaussian::isotropic(2, 1.0), SmilingDrift{0.5}, 1.0, 2.0, {}};
  throw ConfigError("unknown gradient family " + family);
}

}  // namespace

CheckResult check_loss_gradients(const std::string& family, int instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const ProblemSpec spec = gradient_family(family);
  TrainConfig cfg;
  cfg.n_t = 2;
  cfg.n_k = 3;
  cfg.n_b = 4;
  cfg.n_1 = 3;
  cfg.penalty_chunk = 2;
  cfg.lambda = 1.0;
  Architecture arch;
  arch.horizon = spec.horizon();
  constexpr double h = 1e-5;
  constexpr int kCoords = 32;
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    const auto m = random_model(arch, seed + 3000 + static_cast<std::uint64_t>(k), 0.2);
    auto rng = make_stream(seed + static_cast<std::uint64_t>(k), 3);
    const auto batch = draw_batch(spec, cfg, rng);
    const auto g = loss_grad_parallel(m, spec, cfg, batch).grad;

    std::uniform_int_distribution<std::size_t> pick(0, m.n_params() - 1);
    double num = 0.0, den = 0.0;
    for (int c = 0; c < kCoords; ++c) {
      const std::size_t i = pick(rng);
      auto p = std::vector<double>(m.params().begin(), m.params().end());
      p[i] += h;
      const double up = loss_value(FlowModel(arch, p), spec, cfg, batch).total();
      p[i] -= 2 * h;
      const double dn = loss_value(FlowModel(arch, p), spec, cfg, batch).total();
      const double fd = (up - dn) / (2 * h);
      num += (g[i] - fd) * (g[i] - fd);
      den += fd * fd;
    }
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return finish("gradient-" + family, worst, 1e-4, t0, std::to_string(instances) + " instances");
}

CheckResult check_kernel_vs_closed_form() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int d : {1, 2})
    for (double beta : {0.5, 1.0})
      for (double T : {1.0, 2.0}) {
        const auto p0 = Gaussian::isotropic(d, 2.0 * (T + 1.0) / beta);
        QuadratureSpec q;
        q.L = 8.0 * std::sqrt(std::max(1.0, T / beta));  // margin grows with the kernel width
        const double k = kernel_optimal_cost(p0, QuadraticPotential{}, beta, T, q).value;
        worst = std::max(worst, std::abs(k - rwpo_quadratic_cost(d, beta, T)));
      }
  return finish("kernel-vs-closed-form", worst, 1e-3, t0, "8 (d, beta, T) triples");
}

CheckResult check_w2_vs_discrete(int pairs, int n, int replicates, std::uint64_t seed) {
  const auto t0 = Clock::now();
  auto rng = make_stream(seed, 4);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0.3, 2.0);
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    // Random SPD covariances and means separated by at least one unit.
    auto rand_cov = [&] {
      Eigen::Matrix2d R;
      const double a = 3.14159265358979 * u(rng);
      R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      return Eigen::Matrix2d(R * Eigen::Vector2d(u(rng), u(rng)).asDiagonal() * R.transpose());
    };
    const Eigen::Matrix2d S0 = rand_cov(), S1 = rand_cov();
    const Eigen::Vector2d mu0(normal(rng), normal(rng));
    const Eigen::Vector2d dir = Eigen::Vector2d(normal(rng), normal(rng)).normalized();
    const Eigen::Vector2d mu1 = mu0 + (1.0 + 2.0 * u(rng)) * dir;
    const Gaussian g0(mu0, S0), g1(mu1, S1);
    const double exact = gaussian_w2sq(mu0, S0, mu1, S1);
    std::vector<double> est;
    for (int r = 0; r < replicates; ++r) {
      Eigen::MatrixXd A(n, 2), B(n, 2);
      for (int i = 0; i < n; ++i) {
        std::array<double, 2> x{};
        g0.sample(rng, x);
        A.row(i) << x[0], x[1];
        g1.sample(rng, x);
        B.row(i) << x[0], x[1];
      }
      est.push_back(2.0 * discrete_ot_cost(A, B));
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / replicates;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (replicates - 1) / replicates);
    worst = std::max(worst, std::abs(mean - exact) / se);
  }
  return finish("w2-vs-discrete-ot", worst, 3.0, t0, "SE units");
}

CheckResult check_stationarity(int points, std::uint64_t seed) {
  const auto t0 = Clock::now();
  auto rng = make_stream(seed, 5);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ud(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const std::array<double, 2> x{ux(rng), ux(rng)};
    const double r = x[0] * x[0] + x[1] * x[1] - 4.0;
    const double g1 = x[0] * r, g2 = x[1] * r + 2.0 * (x[1] + 1.0);
    const double lap = 2.0 * r + 2.0 * (x[0] * x[0] + x[1] * x[1]) + 2.0;
    const double scale = std::max(1.0, std::exp(-smiling_potential(x)) * (g1 * g1 + g2 * g2 + std::abs(lap)));
    worst = std::max(worst, std::abs(stationarity_residual(ud(rng), 1.0, x)) / scale);
  }
  return finish("stationarity-residual", worst, 1e-10, t0, std::to_string(points) + " points");
}

CheckResult check_ou_moment(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto e = ou_second_moment_em(1.0, 1.0, 0.5, 4.0, 2, 100000, 1e-3, seed);
  const double exact = ou_second_moment(1.0, 1.0, 0.5, 8.0, 2);
  return finish("ou-moment-vs-em", std::abs(e.mean - exact) / e.se, 3.0, t0,
                fmt("em %.5f exact %.5f", e.mean, exact));
}

std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                          const std::function<void(const CheckResult&)>& on_result) {
  const bool all = suite == "all";
  if (!all && suite != "spline" && suite != "flow" && suite != "diffkit" && suite != "oracles")
    throw ConfigError("verify: unknown suite " + suite + " (spline, flow, diffkit, oracles, all)");
  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, const std::function<CheckResult()>& f) {
    CheckResult r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r = {name, false, std::numeric_limits<double>::infinity(), 0.0, 0.0, std::string("threw: ") + e.what()};
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  if (all || suite == "spline") run("spline-roundtrip", [] { return check_spline_roundtrip(10000, 1); });
  if (all || suite == "flow") {
    run("flow-logdet-d2", [] { return check_flow_logdet(2, 100, 2); });
    run("flow-logdet-d3", [] { return check_flow_logdet(3, 100, 3); });
    run("density-normalization", [] { return check_density_normalization(20, 4); });
  }
  if (all || suite == "diffkit")
    for (std::string f : {"ot", "rwpo", "fp-ou", "fp-smiling"})
      run("gradient-" + f, [f] { return check_loss_gradients(f, 50, 5); });
  if (all || suite == "oracles") {
    run("kernel-vs-closed-form", [] { return check_kernel_vs_closed_form(); });
    run("w2-vs-discrete-ot", [] { return check_w2_vs_discrete(5, 512, 8, 6); });
    run("stationarity-residual", [] { return check_stationarity(1000, 7); });
    run("ou-moment-vs-em", [] { return check_ou_moment(8); });
  }
  return out;
}

}  // namespace vcnf
