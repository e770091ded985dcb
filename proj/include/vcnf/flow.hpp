#pragma once

// Time-conditioned autoregressive spline flow f(., t): R^d -> R^d.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "vcnf/conditioner.hpp"
#include "vcnf/spline.hpp"

namespace vcnf {

class FlowModel {
 public:
  FlowModel(Architecture arch, std::uint64_t seed);
  FlowModel(Architecture arch, std::vector<double> params);

  const Architecture& arch() const noexcept { return arch_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  const std::vector<ArLayer>& layers() const noexcept { return layout_.layers; }
  int dim() const noexcept { return arch_.dim; }
  std::size_t n_params() const noexcept { return layout_.size; }

  std::span<const double> params() const noexcept { return params_; }
  std::vector<double>& mutable_params() noexcept { return params_; }
  void set_params(std::vector<double> p);

  double scaled_time(double t) const noexcept { return t / arch_.horizon; }

 private:
  Architecture arch_;
  ParamLayout layout_;
  std::vector<double> params_;
};

template <class S>
struct FlowEval {
  std::vector<S> x;
  S logdet;
};

inline double standard_normal_log_pdf(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  return -0.5 * sq - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

template <class S>
S standard_normal_log_pdf(std::span<const S> z) {
  S sq = 0.0;
  for (const auto& v : z) sq = sq + square(v);
  return -0.5 * sq - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

namespace detail {

template <class S>
RQSpline<S> position_spline(const FlowModel& m, const ConditionerNet& net, std::span<const S> prefix,
                            double ts) {
  std::array<S, kMaxWidth> raw{};
  const auto n = static_cast<std::size_t>(net.output_dim);
  conditioner_forward<S>(net, m.params(), prefix, ts, std::span<S>(raw.data(), n));
  return decode_theta<S>(std::span<const S>(raw.data(), n), m.arch().spline);
}

}  // namespace detail

/// The flow frozen at one time t. The t-only conditioners (position 0 of each
/// layer) are evaluated once at construction and reused for every point.
/// With S = Var, construct and use the slice under the same active tape.
template <class S>
class FlowAt {
 public:
  FlowAt(const FlowModel& m, double t) : m_(&m), t_(t), ts_(m.scaled_time(t)) {
    if (!std::isfinite(t)) throw NumericError("flow: non-finite time");
    first_.reserve(m.layers().size());
    for (const auto& layer : m.layers())
      first_.push_back(detail::position_spline<S>(m, layer.nets[0], std::span<const S>(), ts_));
  }

  double time() const noexcept { return t_; }
  const FlowModel& model() const noexcept { return *m_; }

  /// One autoregressive layer, in place; returns its log-determinant.
  S layer_forward(std::size_t l, std::vector<S>& y) const {
    const ArLayer& layer = m_->layers()[l];
    std::array<S, kMaxWidth> prefix{};
    S logdet = 0.0;
    for (std::size_t k = 0; k < layer.order.size(); ++k) {
      const auto idx = static_cast<std::size_t>(layer.order[k]);
      const RQSpline<S> spline =
          k == 0 ? first_[l]
                 : detail::position_spline<S>(*m_, layer.nets[k], std::span<const S>(prefix.data(), k), ts_);
      const auto e = spline_forward(spline, y[idx]);
      y[idx] = e.value;
      prefix[k] = e.value;
      logdet = logdet + e.logabsdet;
    }
    return logdet;
  }

  /// Inverse of layer_forward. Every conditioning prefix is read from the
  /// layer output, which the inversion never modifies.
  S layer_inverse(std::size_t l, std::vector<S>& y) const {
    const ArLayer& layer = m_->layers()[l];
    std::array<S, kMaxWidth> prefix{};
    std::vector<S> x = y;
    S logdet = 0.0;
    for (std::size_t k = 0; k < layer.order.size(); ++k) {
      const auto idx = static_cast<std::size_t>(layer.order[k]);
      const RQSpline<S> spline =
          k == 0 ? first_[l]
                 : detail::position_spline<S>(*m_, layer.nets[k], std::span<const S>(prefix.data(), k), ts_);
      const auto e = spline_inverse(spline, y[idx]);
      x[idx] = e.value;
      prefix[k] = y[idx];
      logdet = logdet + e.logabsdet;
    }
    y = std::move(x);
    return logdet;
  }

  FlowEval<S> forward(std::span<const S> z) const {
    check_dim(z.size());
    FlowEval<S> out{std::vector<S>(z.begin(), z.end()), S(0.0)};
    for (std::size_t l = 0; l < m_->layers().size(); ++l) out.logdet = out.logdet + layer_forward(l, out.x);
    return out;
  }

  FlowEval<S> inverse(std::span<const S> x) const {
    check_dim(x.size());
    FlowEval<S> out{std::vector<S>(x.begin(), x.end()), S(0.0)};
    for (std::size_t l = m_->layers().size(); l-- > 0;) out.logdet = out.logdet + layer_inverse(l, out.x);
    return out;
  }

  /// log p(x, t) = log q(f^{-1}(x, t)) + log|det d f^{-1} / dx|.
  S log_density(std::span<const S> x) const {
    for (const auto& v : x)
      if (!std::isfinite(value_of(v))) throw NumericError("log_density: non-finite input");
    const auto inv = inverse(x);
    return standard_normal_log_pdf<S>(inv.x) + inv.logdet;
  }

 private:
  void check_dim(std::size_t n) const {
    if (n != static_cast<std::size_t>(m_->dim())) throw ContractError("flow: input dimension mismatch");
  }

  const FlowModel* m_;
  double t_;
  double ts_;
  std::vector<RQSpline<S>> first_;
};

struct FlowResult {
  std::vector<double> x;
  double logdet = 0.0;
};

FlowResult ar_layer_forward(const FlowModel& m, std::size_t layer, std::span<const double> x, double t);
FlowResult ar_layer_inverse(const FlowModel& m, std::size_t layer, std::span<const double> y, double t);
FlowResult flow_forward(const FlowModel& m, std::span<const double> z, double t);
FlowResult flow_inverse(const FlowModel& m, std::span<const double> x, double t);
double log_density(const FlowModel& m, std::span<const double> x, double t);

/// n points x_i = f(z_i, t) with z_i ~ N(0, I).
std::vector<std::vector<double>> sample(const FlowModel& m, double t, int n, std::mt19937_64& rng);

/// Independent RNG stream for (seed, stream id).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace vcnf
