#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "support.hpp"
#include "vcnf/oracles.hpp"
#include "vcnf/verify.hpp"

using namespace vcnf;
using vcnf::test::small_arch;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = n(rng);
  return A * A.transpose() + 0.2 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("Gaussian OT map") {
  const Eigen::Vector2d m0(1.0, 2.0), m1(-1.0, 0.0);
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  const auto t = gaussian_ot_map(m0, I, m1, I);
  CHECK((t.A - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);
  CHECK((t.A * m0 + t.shift - m1).norm() < 1e-14);
  const auto s = gaussian_ot_map(m0, 4.0 * I, m1, I);
  CHECK((s.A - 0.5 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);
  Eigen::Matrix2d S0;
  S0 << 5.0, 1.0, 1.0, 0.5;
  const auto c4 = gaussian_ot_map(m0, S0, m1, I);
  CHECK((c4.A * S0 * c4.A.transpose() - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-10);
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto A0 = random_spd(rng, 3), A1 = random_spd(rng, 3);
    const auto r = gaussian_ot_map(Eigen::VectorXd::Zero(3), A0, Eigen::VectorXd::Zero(3), A1);
    REQUIRE((r.A * A0 * r.A.transpose() - A1).norm() < 1e-10 * A1.norm());
    REQUIRE((r.A - r.A.transpose()).norm() < 1e-10 * r.A.norm());
    REQUIRE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.A).eigenvalues().minCoeff() > 0.0);
  }
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(gaussian_ot_map(m0, bad, m1, I), ContractError);
}

TEST_CASE("Gaussian W2 benchmark values") {
  const Eigen::Vector2d a(-3.0, -3.0), b(3.0, 3.0);
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  CHECK(0.5 * gaussian_w2sq(a, I, b, I) == doctest::Approx(36.0).epsilon(1e-14));
  Eigen::Matrix2d S0 = I;
  S0(1, 1) = 0.25;
  CHECK(0.5 * gaussian_w2sq(a, S0, a, I) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(std::abs(gaussian_w2sq(a, S0, a, S0)) < 1e-14);
}

TEST_CASE("RWPO closed forms") {
  CHECK(rwpo_quadratic_cost(2, 1.0, 1.0) == doctest::Approx(3.386).epsilon(1e-4));
  CHECK(rwpo_quadratic_cost(2, 0.5, 2.0) == doctest::Approx(8.394).epsilon(1e-4));
  CHECK(rwpo_quadratic_cost(3, 2.0, 0.0) == doctest::Approx(1.5).epsilon(1e-15));

  const std::vector<double> o = {0.0, 0.0};
  const double beta = 2.0, T = 1.5;
  // t = T: centred Gaussian with per-coordinate variance 2 / beta
  CHECK(rwpo_true_density(o, T, beta, T) == doctest::Approx(1.0 / (2.0 * std::numbers::pi * (2.0 / beta))).epsilon(1e-14));

  for (double t : {0.0, 0.7, 1.5}) {
    const int n = 401;
    const double L = 10.0, h = 2 * L / (n - 1);
    double acc = 0.0;
    std::vector<double> x(2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        x[0] = -L + i * h;
        x[1] = -L + j * h;
        acc += rwpo_true_density(x, t, beta, T);
      }
    CHECK(acc * h * h == doctest::Approx(1.0).epsilon(1e-8));
  }
  // grad phi = -x / (T - t + 1)
  const std::vector<double> x = {0.8, -1.3};
  const double t = 0.4, e = 1e-5;
  for (std::size_t i = 0; i < 2; ++i) {
    auto hi = x, lo = x;
    hi[i] += e;
    lo[i] -= e;
    const double fd = (rwpo_true_phi(hi, t, beta, T) - rwpo_true_phi(lo, t, beta, T)) / (2 * e);
    CHECK(fd == doctest::Approx(-x[i] / (T - t + 1.0)).epsilon(1e-8));
  }
}

TEST_CASE("Gauss-Hermite rule") {
  std::vector<double> x, w;
  gauss_hermite(20, x, w);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m2 += w[i] * x[i] * x[i];
    m4 += w[i] * std::pow(x[i], 4);
  }
  CHECK(m2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3 * std::sqrt(std::numbers::pi) / 4).epsilon(1e-13));
  CHECK(std::is_sorted(x.begin(), x.end()));
}

TEST_CASE("kernel cost agrees with the closed form") {
  QuadratureSpec q;
  const auto c = kernel_optimal_cost(Gaussian::isotropic(2, 4.0), QuadraticPotential{}, 1.0, 1.0, q);
  CHECK(std::abs(c.value - rwpo_quadratic_cost(2, 1.0, 1.0)) <= 1e-3);
  CHECK(c.max_shell_fraction < q.max_shell_fraction);
  const auto one = kernel_optimal_cost(Gaussian::isotropic(1, 2.0 * 3.0 / 0.5), QuadraticPotential{}, 0.5, 2.0,
                                       QuadratureSpec{16.0, 256, 48, 1e-8});
  CHECK(std::abs(one.value - rwpo_quadratic_cost(1, 0.5, 2.0)) <= 1e-3);
}

TEST_CASE("kernel cost converges under refinement") {
  const Distribution p0 = Gaussian::isotropic(2, 0.8);
  const Potential V = DoubleWellPotential{1.0};
  QuadratureSpec q;
  q.L = 6.0;
  q.n = 128;
  q.outer = 24;
  const double base = kernel_optimal_cost(p0, V, 5.0, 2.0, q).value;
  QuadratureSpec fine = q;
  fine.n = 256;
  CHECK(std::abs(kernel_optimal_cost(p0, V, 5.0, 2.0, fine).value - base) < 1e-6);
  QuadratureSpec deep = q;
  deep.outer = 48;
  CHECK(std::abs(kernel_optimal_cost(p0, V, 5.0, 2.0, deep).value - base) < 1e-6);
}

TEST_CASE("kernel quadrature reports truncation") {
  QuadratureSpec q;
  q.L = 1.0;
  CHECK_THROWS_AS(kernel_optimal_cost(Gaussian::isotropic(1, 4.0), QuadraticPotential{}, 0.5, 2.0, q), AccuracyError);
  QuadratureSpec bad;
  bad.n = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  const std::vector<double> x = {0.3, 0.2};
  const auto phi = kernel_phi(x, 1.0, 1.0, 1.0, QuadraticPotential{}, QuadratureSpec{});
  CHECK(phi.value == doctest::Approx(-0.5 * (0.09 + 0.04)).epsilon(1e-15));
}

TEST_CASE("OU moments and density") {
  CHECK(ou_second_moment(0.0, 1.0, 0.5, 8.0, 2) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(ou_second_moment(200.0, 1.0, 0.5, 8.0, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ou_second_moment(1.0, 1.0, 0.5, 8.0, 2) == doctest::Approx(2.0 * (0.5 + 3.5 * std::exp(-2.0))).epsilon(1e-14));
  CHECK(ou_second_moment(1.0, 1.0, 0.5, 8.0, 2) == doctest::Approx(1.9473).epsilon(1e-4));
  CHECK_THROWS_AS(ou_variance(1.0, 0.0, 0.5, 1.0), ContractError);

  const double t = 0.6, a = 1.0, g = 0.5, v0 = 4.0;
  const int n = 601;
  const double L = 12.0, h = 2 * L / (n - 1);
  double acc = 0.0;
  std::vector<double> x(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      x[0] = -L + i * h;
      x[1] = -L + j * h;
      acc += ou_density(x, t, a, g, v0);
    }
  CHECK(std::abs(acc * h * h - 1.0) <= 1e-6);
  // score of the analytic density is -x / sigma^2(t)
  const std::vector<double> p = {0.7, -1.1};
  const double var = ou_variance(t, a, g, v0), dx = 1e-3;
  for (std::size_t i = 0; i < 2; ++i) {
    auto hi = p, lo = p;
    hi[i] += 0.5 * dx;
    lo[i] -= 0.5 * dx;
    const double fd = (std::log(ou_density(hi, t, a, g, v0)) - std::log(ou_density(lo, t, a, g, v0))) / dx;
    CHECK(fd == doctest::Approx(-p[i] / var).epsilon(1e-9));
  }
}

TEST_CASE("OU moment vs Euler-Maruyama") {
  const auto r = ou_second_moment_em(1.0, 1.0, 0.5, 4.0, 2, 20000, 1e-3, 5);
  CHECK(std::abs(r.mean - ou_second_moment(1.0, 1.0, 0.5, 8.0, 2)) <= 3.0 * r.se);
  const auto a = ou_second_moment_em(1.0, 1.0, 0.5, 4.0, 2, 2000, 1e-2, 7);
  const auto b = ou_second_moment_em(1.0, 1.0, 0.5, 4.0, 2, 2000, 1e-2, 7);
  CHECK(a.mean == b.mean);
}

TEST_CASE("Hungarian assignment is optimal on small problems") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int n = 1; n <= 7; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::MatrixXd C(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) C(i, j) = u(rng);
      const auto a = hungarian(C);
      double got = 0.0;
      for (int i = 0; i < n; ++i) got += C(i, a[static_cast<std::size_t>(i)]);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += C(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, c);
      } while (std::next_permutation(perm.begin(), perm.end()));
      REQUIRE(got == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("discrete OT cost") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd A(50, 2);
  for (int i = 0; i < 50; ++i) A.row(i) << n(rng), n(rng);
  CHECK(discrete_ot_cost(A, A) == 0.0);

  // 1D: monotone pairing of sorted samples
  std::vector<double> a(60), b(60);
  for (auto& v : a) v = n(rng);
  for (auto& v : b) v = 2.0 + 0.5 * n(rng);
  Eigen::MatrixXd X(60, 1), Y(60, 1);
  for (int i = 0; i < 60; ++i) {
    X(i, 0) = a[static_cast<std::size_t>(i)];
    Y(i, 0) = b[static_cast<std::size_t>(i)];
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sorted = 0.0;
  for (std::size_t i = 0; i < 60; ++i) sorted += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(discrete_ot_cost(X, Y) == doctest::Approx(sorted / 120.0).epsilon(1e-12));

  // case 1 samples land near 36
  Eigen::MatrixXd P(256, 2), Q(256, 2);
  for (int i = 0; i < 256; ++i) {
    P.row(i) << -3.0 + n(rng), -3.0 + n(rng);
    Q.row(i) << 3.0 + n(rng), 3.0 + n(rng);
  }
  CHECK(std::abs(discrete_ot_cost(P, Q) - 36.0) <= 0.15 * 36.0);
  CHECK_THROWS_AS(discrete_ot_cost(P, Q.topRows(10)), ContractError);
}

TEST_CASE("W2 closed form vs discrete OT") {
  const auto r = check_w2_vs_discrete(3, 256, 8, 4);
  CHECK(r.pass);
  CHECK(r.metric <= 3.0);
}

TEST_CASE("smiling stationarity") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<double> x = {u(rng), u(rng)};
    const double pi = std::exp(-smiling_potential(x));
    const double scale = std::max(pi * (1.0 + std::pow(x[0] * x[0] + x[1] * x[1], 3)), 1e-300);
    REQUIRE(std::abs(stationarity_residual(0.5, 1.0, x)) <= 1e-10 * scale);
    REQUIRE(std::abs(stationarity_residual(2.0, 1.0, x)) <= 1e-10 * scale);
    REQUIRE(std::abs(stationarity_residual(0.0, 1.0, x)) <= 1e-10 * scale);
  }
  const std::vector<double> p = {1.0, -1.5};
  CHECK(std::abs(stationarity_residual(0.5, 2.0, p)) > 1e-3 * std::exp(-smiling_potential(p)));
  CHECK(check_stationarity(500, 3).pass);
}

TEST_CASE("grid RMSE") {
  const FlowModel id(small_arch(2), std::uint64_t{1});
  const auto normal = [](std::span<const double> x) {
    return std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1])) / (2.0 * std::numbers::pi);
  };
  CHECK(rmse_on_grid(id, 0.5, normal, 5.0, 101) <= 1e-12);
  const auto wide = [](std::span<const double> x) { return ou_density(x, 0.0, 1.0, 1.0, 1.5); };
  const double fine = rmse_on_grid(id, 0.5, wide, 5.0, 500);
  const double coarse = rmse_on_grid(id, 0.5, wide, 5.0, 250);
  CHECK(fine > 0.0);
  CHECK(std::abs(coarse - fine) / fine < 0.05);
  const auto heavy = [](std::span<const double>) { return 1.0; };
  CHECK_THROWS_AS(rmse_on_grid(id, 0.5, heavy, 5.0, 101), ContractError);
}

TEST_CASE("oracle CSV rows") {
  CHECK(oracle_csv_row("w2", "case=5", 0.125, 0.0).rfind("w2,", 0) == 0);
}
