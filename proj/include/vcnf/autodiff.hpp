#pragma once

// Tape-based reverse-mode differentiation.
//
// A Tape owns one Wengert list. Trainable parameters occupy node ids
// [0, n_params) on every tape, so gradients of independent tapes line up
// index-for-index and can be summed. Model code is written once as a
// template over the scalar type and instantiated with either `double`
// (plain evaluation) or `ad::Var` (recorded evaluation).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcnf::ad {

class GradientError : public std::runtime_error {
 public:
  explicit GradientError(const std::string& primitive)
      : std::runtime_error("non-finite value produced by primitive '" + primitive + "'"),
        primitive_(primitive) {}
  const std::string& primitive() const noexcept { return primitive_; }

 private:
  std::string primitive_;
};

/// Scalar handle. id < 0 marks a constant that is not tracked.
struct Var {
  double v = 0.0;
  std::int32_t id = -1;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Var(double value, std::int32_t node) : v(value), id(node) {}

  bool tracked() const noexcept { return id >= 0; }
};

class Tape {
 public:
  /// Clears the tape and reserves ids [0, n_params) for parameter leaves.
  void reset(std::size_t n_params);

  std::size_t n_params() const noexcept { return n_params_; }
  std::size_t n_nodes() const noexcept { return n_nodes_; }

  std::int32_t push(std::int32_t a, double da);
  std::int32_t push(std::int32_t a, double da, std::int32_t b, double db);
  std::int32_t push(std::span<const std::int32_t> parents, std::span<const double> partials);

  /// y = W x + b where W (rows x cols, row-major) and b are parameter leaves
  /// starting at w_offset / b_offset and `params` holds their values.
  /// Writes `rows` new tracked outputs into y.
  void dense(const double* params, std::size_t w_offset, std::size_t b_offset, std::size_t rows,
             std::size_t cols, std::span<const Var> x, std::span<Var> y);

  /// Records the name of the first primitive that produced a non-finite value.
  void flag_nonfinite(const char* primitive) {
    if (failed_ == nullptr) failed_ = primitive;
  }
  const char* failed_primitive() const noexcept { return failed_; }

  /// Adjoints of every node with respect to `root`.
  /// The returned buffer is owned by the tape and valid until the next call.
  std::span<const double> backward(const Var& root);

 private:
  enum class Kind : std::uint8_t { Scalar, Dense };
  struct Record {
    Kind kind;
    std::uint32_t node;   // first output id
    std::uint32_t begin;  // edge index or dense-meta index
    std::uint32_t count;  // edge count (scalar records)
  };
  struct DenseMeta {
    const double* params;
    std::uint32_t w_offset, b_offset, rows, cols, in_begin;
  };

  std::int32_t new_node();

  std::size_t n_params_ = 0;
  std::size_t n_nodes_ = 0;
  std::vector<Record> records_;
  std::vector<std::int32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::vector<DenseMeta> dense_;
  std::vector<std::int32_t> dense_in_id_;
  std::vector<double> dense_in_val_;
  std::vector<double> adjoint_;
  const char* failed_ = nullptr;
};

Tape*& active_tape() noexcept;

/// Installs a tape as the thread's active tape for the lifetime of the guard.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(active_tape()) { active_tape() = &tape; }
  ~TapeScope() { active_tape() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

namespace detail {

inline Var unary(const Var& a, double value, double da, const char* name) {
  Tape* t = active_tape();
  if (!a.tracked() || t == nullptr) return Var(value);
  if (!std::isfinite(value) || !std::isfinite(da)) t->flag_nonfinite(name);
  return Var(value, t->push(a.id, da));
}

inline Var binary(const Var& a, const Var& b, double value, double da, double db,
                  const char* name) {
  Tape* t = active_tape();
  if (t == nullptr || (!a.tracked() && !b.tracked())) return Var(value);
  if (!std::isfinite(value)) t->flag_nonfinite(name);
  if (!a.tracked()) return Var(value, t->push(b.id, db));
  if (!b.tracked()) return Var(value, t->push(a.id, da));
  return Var(value, t->push(a.id, da, b.id, db));
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a, b, a.v + b.v, 1.0, 1.0, "add"); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a, b, a.v - b.v, 1.0, -1.0, "sub"); }
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a, b, a.v * b.v, b.v, a.v, "mul"); }
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.v / b.v;
  return detail::binary(a, b, q, 1.0 / b.v, -q / b.v, "div");
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.v, -1.0, "neg"); }

inline Var operator+(const Var& a, double b) { return detail::unary(a, a.v + b, 1.0, "add"); }
inline Var operator+(double a, const Var& b) { return detail::unary(b, a + b.v, 1.0, "add"); }
inline Var operator-(const Var& a, double b) { return detail::unary(a, a.v - b, 1.0, "sub"); }
inline Var operator-(double a, const Var& b) { return detail::unary(b, a - b.v, -1.0, "sub"); }
inline Var operator*(const Var& a, double b) { return detail::unary(a, a.v * b, b, "mul"); }
inline Var operator*(double a, const Var& b) { return detail::unary(b, a * b.v, a, "mul"); }
inline Var operator/(const Var& a, double b) { return detail::unary(a, a.v / b, 1.0 / b, "div"); }
inline Var operator/(double a, const Var& b) {
  const double q = a / b.v;
  return detail::unary(b, q, -q / b.v, "div");
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline bool operator<(const Var& a, const Var& b) { return a.v < b.v; }
inline bool operator>(const Var& a, const Var& b) { return a.v > b.v; }
inline bool operator<=(const Var& a, const Var& b) { return a.v <= b.v; }
inline bool operator>=(const Var& a, const Var& b) { return a.v >= b.v; }

inline Var exp(const Var& a) {
  const double e = std::exp(a.v);
  return detail::unary(a, e, e, "exp");
}
inline Var log(const Var& a) { return detail::unary(a, std::log(a.v), 1.0 / a.v, "log"); }
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.v);
  return detail::unary(a, s, 0.5 / s, "sqrt");
}
inline Var tanh(const Var& a) {
  const double th = std::tanh(a.v);
  return detail::unary(a, th, 1.0 - th * th, "tanh");
}
inline Var log1p(const Var& a) { return detail::unary(a, std::log1p(a.v), 1.0 / (1.0 + a.v), "log1p"); }

}  // namespace vcnf::ad

namespace vcnf {

using ad::Var;

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Var& x) noexcept { return x.v; }

inline double square(double x) noexcept { return x * x; }
inline Var square(const Var& x) { return ad::detail::unary(x, x.v * x.v, 2.0 * x.v, "square"); }

/// log(1 + e^x), overflow-safe.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline Var softplus(const Var& x) {
  const double sig = 1.0 / (1.0 + std::exp(-x.v));
  return ad::detail::unary(x, softplus(x.v), sig, "softplus");
}

/// max(x, floor) with the gradient of whichever branch is active.
inline double max_with(double x, double floor) noexcept { return x < floor ? floor : x; }
inline Var max_with(const Var& x, double floor) { return x.v < floor ? Var(floor) : x; }

/// Parameter i as a scalar of type S (a tape leaf when S = Var).
template <class S>
S param(std::span<const double> params, std::size_t i);

template <>
inline double param<double>(std::span<const double> params, std::size_t i) {
  return params[i];
}
template <>
inline Var param<Var>(std::span<const double> params, std::size_t i) {
  return Var(params[i], static_cast<std::int32_t>(i));
}

/// y = W x + b with W, b read from the flat parameter vector.
inline void dense(std::span<const double> params, std::size_t w_offset, std::size_t b_offset,
                  std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* w = params.data() + w_offset + i * cols;
    double acc = params[b_offset + i];
    for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j];
    y[i] = acc;
  }
}

inline void dense(std::span<const double> params, std::size_t w_offset, std::size_t b_offset,
                  std::size_t rows, std::size_t cols, std::span<const Var> x, std::span<Var> y) {
  ad::Tape* t = ad::active_tape();
  if (t == nullptr) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* w = params.data() + w_offset + i * cols;
      double acc = params[b_offset + i];
      for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j].v;
      y[i] = Var(acc);
    }
    return;
  }
  t->dense(params.data(), w_offset, b_offset, rows, cols, x, y);
}

struct GradResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// Value and gradient of `loss` at `params`. `loss` is invoked with the
/// parameter vector and must build its result from Var arithmetic, using
/// param<Var>() / dense() to read parameters.
template <class Loss>
GradResult grad(Loss&& loss, std::span<const double> params, ad::Tape& tape) {
  tape.reset(params.size());
  ad::TapeScope scope(tape);
  const Var out = loss(params);
  if (tape.failed_primitive() != nullptr) throw ad::GradientError(tape.failed_primitive());
  GradResult r;
  r.value = out.v;
  r.grad.assign(params.size(), 0.0);
  if (out.tracked()) {
    auto adj = tape.backward(out);
    for (std::size_t i = 0; i < params.size(); ++i) r.grad[i] = adj[i];
  }
  return r;
}

template <class Loss>
GradResult grad(Loss&& loss, std::span<const double> params) {
  ad::Tape tape;
  return grad(std::forward<Loss>(loss), params, tape);
}

}  // namespace vcnf
