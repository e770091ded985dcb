#include "vcnf/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "vcnf/errors.hpp"

namespace vcnf {

Gaussian::Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto d = mean_.size();
  if (d < 1 || cov_.rows() != d || cov_.cols() != d) throw ConfigError("gaussian: mean/cov shape mismatch");
  if (!mean_.allFinite() || !cov_.allFinite()) throw ConfigError("gaussian: non-finite parameters");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov_.cwiseAbs().maxCoeff()))
    throw ConfigError("gaussian: covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw ConfigError("gaussian: covariance is not positive definite");
  chol_ = llt.matrixL();
  const double logdet = 2.0 * chol_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet);
}

Gaussian Gaussian::isotropic(int dim, double variance, double center) {
  return Gaussian(Eigen::VectorXd::Constant(dim, center), variance * Eigen::MatrixXd::Identity(dim, dim));
}

double Gaussian::log_pdf(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != mean_.size()) throw ContractError("gaussian: dimension mismatch");
  const Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(x.data(), mean_.size()) - mean_;
  const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(diff);
  return log_norm_ - 0.5 * w.squaredNorm();
}

void Gaussian::sample(std::mt19937_64& rng, std::span<double> out) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd x = mean_ + chol_ * z;
  for (Eigen::Index i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = x[i];
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Gaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty() || weights_.size() != components_.size())
    throw ConfigError("mixture: need one weight per component");
  for (const auto& c : components_)
    if (c.dim() != components_.front().dim()) throw ConfigError("mixture: component dimensions differ");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ConfigError("mixture: weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: weights must sum to 1");
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

double GaussianMixture::log_pdf(std::span<const double> x) const {
  std::vector<double> terms(components_.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < components_.size(); ++i) {
    terms[i] = std::log(weights_[i]) + components_[i].log_pdf(x);
    mx = std::max(mx, terms[i]);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

void GaussianMixture::sample(std::mt19937_64& rng, std::span<double> out) const {
  std::uniform_real_distribution<double> u(0.0, cumulative_.back());
  const double r = u(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), components_.size() - 1);
  components_[k].sample(rng, out);
}

int Distribution::dim() const {
  return std::visit([](const auto& d) { return d.dim(); }, v_);
}

double Distribution::log_pdf(std::span<const double> x) const {
  return std::visit([&](const auto& d) { return d.log_pdf(x); }, v_);
}

void Distribution::sample(std::mt19937_64& rng, std::span<double> out) const {
  std::visit([&](const auto& d) { d.sample(rng, out); }, v_);
}

Eigen::VectorXd Distribution::mean() const {
  if (const auto* g = gaussian()) return g->mean();
  const auto* m = mixture();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m->dim());
  for (std::size_t i = 0; i < m->components().size(); ++i) mu += m->weights()[i] * m->components()[i].mean();
  return mu;
}

Eigen::MatrixXd Distribution::cov() const {
  if (const auto* g = gaussian()) return g->cov();
  const auto* m = mixture();
  const Eigen::VectorXd mu = mean();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m->dim(), m->dim());
  for (std::size_t i = 0; i < m->components().size(); ++i) {
    const auto& comp = m->components()[i];
    const Eigen::VectorXd dm = comp.mean() - mu;
    c += m->weights()[i] * (comp.cov() + dm * dm.transpose());
  }
  return c;
}

GaussianMixture ring_mixture() {
  const double centers[8][2] = {{5, 0}, {3, 4}, {0, 5}, {-3, 4}, {-5, 0}, {-3, -4}, {0, -5}, {3, -4}};
  std::vector<Gaussian> comps;
  for (const auto& c : centers) comps.emplace_back(Eigen::Vector2d(c[0], c[1]), Eigen::Matrix2d::Identity());
  return GaussianMixture(std::vector<double>(8, 0.125), std::move(comps));
}

}  // namespace vcnf
