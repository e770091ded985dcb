#include "vcnf/conditioner.hpp"

#include <random>

namespace vcnf {

void Architecture::validate() const {
  if (dim < 1 || dim + 1 > kMaxWidth) throw ConfigError("architecture: dim out of range");
  if (layers < 1) throw ConfigError("architecture: need at least one layer");
  if (hidden.empty()) throw ConfigError("architecture: need at least one hidden layer");
  for (int h : hidden)
    if (h < 1 || h > kMaxWidth) throw ConfigError("architecture: hidden width out of range");
  if (!(horizon > 0.0)) throw ConfigError("architecture: horizon must be positive");
  spline.validate();
  if (spline.raw_size() > kMaxWidth) throw ConfigError("architecture: too many spline bins");
}

ParamLayout build_layout(const Architecture& arch) {
  arch.validate();
  ParamLayout out;
  std::size_t offset = 0;
  for (int l = 0; l < arch.layers; ++l) {
    ArLayer layer;
    for (int k = 0; k < arch.dim; ++k)
      layer.order.push_back(l % 2 == 0 ? k : arch.dim - 1 - k);
    for (int k = 0; k < arch.dim; ++k) {
      ConditionerNet net;
      net.input_dim = k + 1;
      net.output_dim = arch.spline.raw_size();
      int in = net.input_dim;
      std::vector<int> widths = arch.hidden;
      widths.push_back(net.output_dim);
      for (std::size_t a = 0; a < widths.size(); ++a) {
        AffineLayout al;
        al.rows = widths[a];
        al.cols = in;
        const std::string base =
            "layer" + std::to_string(l) + ".cond" + std::to_string(k) + ".fc" + std::to_string(a);
        al.w_offset = offset;
        out.index.push_back({base + ".weight", offset, al.rows, al.cols});
        offset += static_cast<std::size_t>(al.rows) * static_cast<std::size_t>(al.cols);
        al.b_offset = offset;
        out.index.push_back({base + ".bias", offset, al.rows, 1});
        offset += static_cast<std::size_t>(al.rows);
        net.affines.push_back(al);
        in = widths[a];
      }
      layer.nets.push_back(std::move(net));
    }
    out.layers.push_back(std::move(layer));
  }
  out.size = offset;
  return out;
}

std::vector<double> init_model_params(const Architecture& arch, std::uint64_t seed) {
  const ParamLayout layout = build_layout(arch);
  std::vector<double> params(layout.size, 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& layer : layout.layers) {
    for (const auto& net : layer.nets) {
      for (std::size_t a = 0; a + 1 < net.affines.size(); ++a) {
        const auto& al = net.affines[a];
        const double bound = 1.0 / std::sqrt(static_cast<double>(al.cols));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t nw = static_cast<std::size_t>(al.rows) * static_cast<std::size_t>(al.cols);
        for (std::size_t i = 0; i < nw; ++i) params[al.w_offset + i] = u(rng);
        for (int i = 0; i < al.rows; ++i) params[al.b_offset + static_cast<std::size_t>(i)] = u(rng);
      }
    }
  }
  return params;
}

}  // namespace vcnf
