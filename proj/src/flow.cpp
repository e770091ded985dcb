#include "vcnf/flow.hpp"

namespace vcnf {

FlowModel::FlowModel(Architecture arch, std::uint64_t seed)
    : arch_(std::move(arch)), layout_(build_layout(arch_)), params_(init_model_params(arch_, seed)) {}

FlowModel::FlowModel(Architecture arch, std::vector<double> params)
    : arch_(std::move(arch)), layout_(build_layout(arch_)) {
  set_params(std::move(params));
}

void FlowModel::set_params(std::vector<double> p) {
  if (p.size() != layout_.size) throw ContractError("flow: parameter vector has wrong length");
  for (double v : p)
    if (!std::isfinite(v)) throw NumericError("flow: non-finite parameter");
  params_ = std::move(p);
}

FlowResult ar_layer_forward(const FlowModel& m, std::size_t layer, std::span<const double> x, double t) {
  if (layer >= m.layers().size()) throw ContractError("ar_layer_forward: layer index out of range");
  if (x.size() != static_cast<std::size_t>(m.dim())) throw ContractError("ar_layer_forward: dimension mismatch");
  FlowAt<double> f(m, t);
  FlowResult r{std::vector<double>(x.begin(), x.end()), 0.0};
  r.logdet = f.layer_forward(layer, r.x);
  return r;
}

FlowResult ar_layer_inverse(const FlowModel& m, std::size_t layer, std::span<const double> y, double t) {
  if (layer >= m.layers().size()) throw ContractError("ar_layer_inverse: layer index out of range");
  if (y.size() != static_cast<std::size_t>(m.dim())) throw ContractError("ar_layer_inverse: dimension mismatch");
  FlowAt<double> f(m, t);
  FlowResult r{std::vector<double>(y.begin(), y.end()), 0.0};
  r.logdet = f.layer_inverse(layer, r.x);
  return r;
}

FlowResult flow_forward(const FlowModel& m, std::span<const double> z, double t) {
  auto e = FlowAt<double>(m, t).forward(z);
  return {std::move(e.x), e.logdet};
}

FlowResult flow_inverse(const FlowModel& m, std::span<const double> x, double t) {
  auto e = FlowAt<double>(m, t).inverse(x);
  return {std::move(e.x), e.logdet};
}

double log_density(const FlowModel& m, std::span<const double> x, double t) {
  return FlowAt<double>(m, t).log_density(x);
}

std::vector<std::vector<double>> sample(const FlowModel& m, double t, int n, std::mt19937_64& rng) {
  if (n <= 0) throw ContractError("sample: n must be positive");
  FlowAt<double> f(m, t);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(m.dim()));
  for (int i = 0; i < n; ++i) {
    for (auto& v : z) v = normal(rng);
    out.push_back(f.forward(z).x);
  }
  return out;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace vcnf
