#pragma once

// Fully-connected conditioning networks and the flat parameter layout.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vcnf/autodiff.hpp"
#include "vcnf/spline.hpp"

namespace vcnf {

inline constexpr int kMaxWidth = 128;

enum class Activation { Tanh };

struct Architecture {
  int dim = 2;
  int layers = 2;
  std::vector<int> hidden = {16, 16};
  SplineConfig spline{};
  /// Time horizon T; conditioners are fed t / T.
  double horizon = 1.0;
  Activation activation = Activation::Tanh;

  void validate() const;
};

struct AffineLayout {
  std::size_t w_offset = 0;  // rows x cols, row-major
  std::size_t b_offset = 0;
  int rows = 0;  // output width
  int cols = 0;  // input width
};

/// NN^(k): (x_{1:k}, t) -> raw spline parameters.
struct ConditionerNet {
  int input_dim = 1;
  int output_dim = 0;
  std::vector<AffineLayout> affines;  // hidden..., output
};

struct ArLayer {
  std::vector<int> order;             // coordinate visited at each position
  std::vector<ConditionerNet> nets;   // nets[k] conditions position k
};

/// One named tensor inside the flat parameter vector.
struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;  // 1 for biases
};

struct ParamLayout {
  std::vector<ArLayer> layers;
  std::vector<TensorInfo> index;
  std::size_t size = 0;
};

/// Builds layers with alternating coordinate orders (1..d), (d..1), ...
ParamLayout build_layout(const Architecture& arch);

/// Fan-in uniform hidden layers, zero output layers; reproducible from seed.
std::vector<double> init_model_params(const Architecture& arch, std::uint64_t seed);

/// Evaluates a conditioner. `out` must have length net.output_dim.
template <class S>
void conditioner_forward(const ConditionerNet& net, std::span<const double> params,
                         std::span<const S> prefix, double t_scaled, std::span<S> out) {
  using std::tanh;
  if (static_cast<int>(prefix.size()) + 1 != net.input_dim)
    throw ContractError("conditioner_forward: prefix length does not match network input");
  if (static_cast<int>(out.size()) != net.output_dim)
    throw ContractError("conditioner_forward: output buffer has wrong length");
  std::array<S, kMaxWidth> a{}, b{};
  for (std::size_t i = 0; i < prefix.size(); ++i) a[i] = prefix[i];
  a[prefix.size()] = S(t_scaled);
  std::size_t width = static_cast<std::size_t>(net.input_dim);
  const std::size_t n_affine = net.affines.size();
  for (std::size_t l = 0; l + 1 < n_affine; ++l) {
    const auto& L = net.affines[l];
    dense(params, L.w_offset, L.b_offset, static_cast<std::size_t>(L.rows), width,
          std::span<const S>(a.data(), width), std::span<S>(b.data(), static_cast<std::size_t>(L.rows)));
    width = static_cast<std::size_t>(L.rows);
    for (std::size_t i = 0; i < width; ++i) a[i] = tanh(b[i]);
  }
  const auto& L = net.affines.back();
  dense(params, L.w_offset, L.b_offset, static_cast<std::size_t>(L.rows), width,
        std::span<const S>(a.data(), width), out);
}

}  // namespace vcnf
