#pragma once

#include <Eigen/Dense>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace vcnf {

class Gaussian {
 public:
  Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  static Gaussian isotropic(int dim, double variance, double center = 0.0);

  int dim() const noexcept { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& cov() const noexcept { return cov_; }

  double log_pdf(std::span<const double> x) const;
  void sample(std::mt19937_64& rng, std::span<double> out) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;  // lower factor
  double log_norm_ = 0.0;
};

class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Gaussian> components);

  int dim() const noexcept { return components_.front().dim(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Gaussian>& components() const noexcept { return components_; }

  double log_pdf(std::span<const double> x) const;
  void sample(std::mt19937_64& rng, std::span<double> out) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::vector<Gaussian> components_;
};

/// Gaussian | GaussianMixture.
class Distribution {
 public:
  Distribution(Gaussian g) : v_(std::move(g)) {}          // NOLINT(google-explicit-constructor)
  Distribution(GaussianMixture g) : v_(std::move(g)) {}   // NOLINT(google-explicit-constructor)

  int dim() const;
  double log_pdf(std::span<const double> x) const;
  void sample(std::mt19937_64& rng, std::span<double> out) const;
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd cov() const;

  const Gaussian* gaussian() const noexcept { return std::get_if<Gaussian>(&v_); }
  const GaussianMixture* mixture() const noexcept { return std::get_if<GaussianMixture>(&v_); }

 private:
  std::variant<Gaussian, GaussianMixture> v_;
};

/// Eight unit-covariance components on the radius-5 ring used for the mixture transport run.
GaussianMixture ring_mixture();

}  // namespace vcnf
