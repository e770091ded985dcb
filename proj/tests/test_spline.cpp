#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "support.hpp"
#include "vcnf/spline.hpp"

using namespace vcnf;
using vcnf::test::make_spline;
using vcnf::test::random_spline;

namespace {

// Rational-quadratic bin written out directly from the knot data.
struct BinOracle {
  double value, slope;
};

BinOracle rq_bin(double xk, double xk1, double yk, double yk1, double dk, double dk1, double x) {
  const double w = xk1 - xk, h = yk1 - yk, s = h / w;
  const double xi = (x - xk) / w;
  const double a = s * xi * xi + dk * xi * (1.0 - xi);
  const double b = s + (dk + dk1 - 2.0 * s) * xi * (1.0 - xi);
  const double num_d = s * s * (dk1 * xi * xi + 2.0 * s * xi * (1.0 - xi) + dk * (1.0 - xi) * (1.0 - xi));
  return {yk + h * a / b, num_d / (b * b)};
}

}  // namespace

TEST_CASE("decode: zero raw parameters give uniform knots and unit derivatives") {
  SplineConfig cfg;  // K = 5, B = 8
  std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()), 0.0);
  const auto p = decode_theta<double>(raw, cfg);
  for (int i = 0; i <= 5; ++i) {
    CHECK(p.knot_x[i] == doctest::Approx(-8.0 + 3.2 * i).epsilon(1e-14));
    CHECK(p.knot_y[i] == doctest::Approx(-8.0 + 3.2 * i).epsilon(1e-14));
    CHECK(p.deriv[i] == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(p.knot_x[0] == -8.0);
  CHECK(p.knot_x[5] == 8.0);
}

TEST_CASE("decode: two-bin example") {
  SplineConfig cfg;
  cfg.bins = 2;
  cfg.bound = 1.0;
  const std::vector<double> raw = {0.0, std::log(3.0), 0.0, 0.0, std::log(std::exp(1.0) - 1.0)};
  const auto p = decode_theta<double>(raw, cfg);
  // softmax (0.25, 0.75) * 2B, then cumulative sums from -B
  CHECK(p.knot_x[0] == -1.0);
  CHECK(p.knot_x[1] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(p.knot_x[2] == 1.0);
  CHECK(p.knot_y[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(p.deriv[0] == 1.0);
  CHECK(p.deriv[2] == 1.0);
  // softplus(log(e - 1) + log(e - 1))
  const double c = std::log(std::exp(1.0) - 1.0);
  CHECK(p.deriv[1] == doctest::Approx(std::log1p(std::exp(2.0 * c))).epsilon(1e-14));
}

TEST_CASE("decode: errors") {
  SplineConfig cfg;
  std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()), 0.0);
  raw[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(decode_theta<double>(raw, cfg), DecodeError);
  raw[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(decode_theta<double>(raw, cfg), DecodeError);
  raw.pop_back();
  raw[3] = 0.0;
  CHECK_THROWS_AS(decode_theta<double>(raw, cfg), DecodeError);
  SplineConfig bad;
  bad.bins = 0;
  CHECK_THROWS_AS(decode_theta<double>(std::vector<double>{}, bad), ConfigError);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("decode: extreme raw values respect the minimum bin size and derivative") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 30.0);
  SplineConfig cfg;
  cfg.bins = 8;
  const double min_size = cfg.min_bin_fraction * 2.0 * cfg.bound;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()));
    for (auto& r : raw) r = n(rng);
    const auto p = decode_theta<double>(raw, cfg);
    REQUIRE(p.knot_x[0] == -cfg.bound);
    REQUIRE(p.knot_y[cfg.bins] == cfg.bound);
    for (int i = 0; i < cfg.bins; ++i) {
      REQUIRE(p.knot_x[i + 1] - p.knot_x[i] >= min_size * (1.0 - 1e-9));
      REQUIRE(p.knot_y[i + 1] - p.knot_y[i] >= min_size * (1.0 - 1e-9));
    }
    for (int i = 0; i <= cfg.bins; ++i) REQUIRE(p.deriv[i] >= cfg.min_derivative);
  }
}

TEST_CASE("forward: identity spline and tails") {
  SplineConfig cfg;
  std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()), 0.0);
  const auto p = decode_theta<double>(raw, cfg);
  const auto e = spline_forward(p, 0.37);
  CHECK(e.value == doctest::Approx(0.37).epsilon(1e-14));
  CHECK(std::abs(e.logabsdet) < 1e-14);
  const auto t = spline_forward(p, 10.0);
  CHECK(t.value == 10.0);
  CHECK(t.logabsdet == 0.0);
  const auto i = spline_inverse(p, 0.37);
  CHECK(i.value == doctest::Approx(0.37).epsilon(1e-14));
  const auto it = spline_inverse(p, -9.0);
  CHECK(it.value == -9.0);
  CHECK(it.logabsdet == 0.0);
  CHECK_THROWS_AS(spline_forward(p, std::numeric_limits<double>::quiet_NaN()), NumericError);
  CHECK_THROWS_AS(spline_inverse(p, std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("forward and inverse: hand-built two-bin spline") {
  const auto p = make_spline({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0}, {1.0, 2.0, 1.0});
  const auto o = rq_bin(-1.0, 0.0, -1.0, 0.0, 1.0, 2.0, -0.5);
  // xi = 0.5, s = 1: -1 + (0.25 + 0.25) / (1 + 0.25)
  CHECK(o.value == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK(o.slope == doctest::Approx(0.8).epsilon(1e-15));
  const auto e = spline_forward(p, -0.5);
  CHECK(e.value == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK(e.logabsdet == doctest::Approx(std::log(0.8)).epsilon(1e-14));
  const auto inv = spline_inverse(p, -0.6);
  CHECK(inv.value == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(inv.logabsdet == doctest::Approx(-std::log(0.8)).epsilon(1e-14));
}

TEST_CASE("forward matches the per-bin oracle on random splines") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = random_spline(rng, 5, 4.0);
    for (int j = 0; j < 20; ++j) {
      const double x = 4.0 * u(rng);
      const int k = find_bin(p.knot_x, p.bins, x);
      const auto o = rq_bin(p.knot_x[k], p.knot_x[k + 1], p.knot_y[k], p.knot_y[k + 1], p.deriv[k], p.deriv[k + 1], x);
      const auto e = spline_forward(p, x);
      worst = std::max({worst, std::abs(e.value - o.value), std::abs(e.logabsdet - std::log(o.slope))});
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("roundtrip over 10^4 random cases") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> kb(2, 8);
  std::uniform_real_distribution<double> bb(1.0, 10.0), u(-1.5, 1.5);
  double worst_x = 0.0, worst_ld = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const double B = bb(rng);
    const auto p = random_spline(rng, kb(rng), B);
    const double x = B * u(rng);
    const auto f = spline_forward(p, x);
    const auto b = spline_inverse(p, f.value);
    worst_x = std::max(worst_x, std::abs(b.value - x));
    worst_ld = std::max(worst_ld, std::abs(f.logabsdet + b.logabsdet));
  }
  CHECK(worst_x <= 1e-10);
  CHECK(worst_ld <= 1e-10);
}

TEST_CASE("monotone on random splines") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = random_spline(rng, 5, 3.0);
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i) {
      const double x = -4.5 + 9.0 * i / 2000.0;
      const double y = spline_forward(p, x).value;
      REQUIRE(y > prev);
      prev = y;
    }
  }
}

TEST_CASE("log-derivative agrees with a central difference away from knots") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6;
  double worst = 0.0;
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const auto p = random_spline(rng, 5, 2.0);
    const double x = 2.0 * u(rng);
    bool near = false;
    for (int k = 0; k <= p.bins; ++k) near = near || std::abs(x - p.knot_x[k]) < 1e-4;
    if (near) continue;
    const double slope = (spline_forward(p, x + h).value - spline_forward(p, x - h).value) / (2.0 * h);
    const double ld = spline_forward(p, x).logabsdet;
    worst = std::max(worst, std::abs(std::exp(ld) - slope) / slope);
    ++checked;
  }
  CHECK(checked > 250);
  CHECK(worst <= 1e-5);
}

TEST_CASE("value and slope are continuous at interior knots") {
  std::mt19937_64 rng(9);
  double worst_v = 0.0, worst_d = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = random_spline(rng, 6, 3.0);
    for (int k = 1; k < p.bins; ++k) {
      const double xk = p.knot_x[k];
      const auto L = rq_bin(p.knot_x[k - 1], xk, p.knot_y[k - 1], p.knot_y[k], p.deriv[k - 1], p.deriv[k], xk);
      const auto R = spline_forward(p, xk);
      worst_v = std::max(worst_v, std::abs(L.value - R.value));
      worst_d = std::max(worst_d, std::abs(L.slope - std::exp(R.logabsdet)));
    }
    // boundary knots meet the identity tails with unit slope
    worst_d = std::max(worst_d, std::abs(std::exp(spline_forward(p, -3.0).logabsdet) - 1.0));
    worst_d = std::max(worst_d, std::abs(std::exp(spline_forward(p, std::nextafter(3.0, 0.0)).logabsdet) - 1.0));
  }
  CHECK(worst_v <= 1e-12);
  CHECK(worst_d <= 1e-9);
}

TEST_CASE("recorded spline matches the plain one") {
  std::mt19937_64 rng(13);
  SplineConfig cfg;
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(cfg.raw_size()));
  for (auto& r : raw) r = n(rng);
  std::vector<Var> vraw(raw.begin(), raw.end());
  const auto p = decode_theta<double>(raw, cfg);
  const auto q = decode_theta<Var>(vraw, cfg);
  for (double x : {-7.9, -1.3, 0.0, 2.2, 7.5}) {
    const auto a = spline_forward(p, x);
    const auto b = spline_forward(q, Var(x));
    CHECK(a.value == b.value.v);
    CHECK(a.logabsdet == b.logabsdet.v);
  }
}
