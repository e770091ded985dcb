#include "vcnf/autodiff.hpp"

#include <algorithm>
#include <limits>

namespace vcnf::ad {

Tape*& active_tape() noexcept {
  thread_local Tape* tape = nullptr;
  return tape;
}

void Tape::reset(std::size_t n_params) {
  if (n_params > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw std::length_error("tape: too many parameters");
  n_params_ = n_params;
  n_nodes_ = n_params;
  records_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  dense_.clear();
  dense_in_id_.clear();
  dense_in_val_.clear();
  failed_ = nullptr;
}

std::int32_t Tape::new_node() {
  if (n_nodes_ >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw std::length_error("tape: node limit exceeded");
  return static_cast<std::int32_t>(n_nodes_++);
}

std::int32_t Tape::push(std::int32_t a, double da) {
  const auto node = new_node();
  records_.push_back({Kind::Scalar, static_cast<std::uint32_t>(node),
                      static_cast<std::uint32_t>(edge_parent_.size()), 1});
  edge_parent_.push_back(a);
  edge_partial_.push_back(da);
  return node;
}

std::int32_t Tape::push(std::int32_t a, double da, std::int32_t b, double db) {
  const auto node = new_node();
  records_.push_back({Kind::Scalar, static_cast<std::uint32_t>(node),
                      static_cast<std::uint32_t>(edge_parent_.size()), 2});
  edge_parent_.push_back(a);
  edge_partial_.push_back(da);
  edge_parent_.push_back(b);
  edge_partial_.push_back(db);
  return node;
}

std::int32_t Tape::push(std::span<const std::int32_t> parents, std::span<const double> partials) {
  const auto node = new_node();
  std::uint32_t count = 0;
  const auto begin = static_cast<std::uint32_t>(edge_parent_.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] < 0) continue;
    edge_parent_.push_back(parents[i]);
    edge_partial_.push_back(partials[i]);
    ++count;
  }
  records_.push_back({Kind::Scalar, static_cast<std::uint32_t>(node), begin, count});
  return node;
}

void Tape::dense(const double* params, std::size_t w_offset, std::size_t b_offset,
                 std::size_t rows, std::size_t cols, std::span<const Var> x, std::span<Var> y) {
  const auto in_begin = static_cast<std::uint32_t>(dense_in_id_.size());
  for (std::size_t j = 0; j < cols; ++j) {
    dense_in_id_.push_back(x[j].id);
    dense_in_val_.push_back(x[j].v);
  }
  const auto first = static_cast<std::uint32_t>(n_nodes_);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* w = params + w_offset + i * cols;
    double acc = params[b_offset + i];
    for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j].v;
    if (!std::isfinite(acc)) flag_nonfinite("dense");
    y[i] = Var(acc, new_node());
  }
  records_.push_back({Kind::Dense, first, static_cast<std::uint32_t>(dense_.size()), 0});
  dense_.push_back({params, static_cast<std::uint32_t>(w_offset),
                    static_cast<std::uint32_t>(b_offset), static_cast<std::uint32_t>(rows),
                    static_cast<std::uint32_t>(cols), in_begin});
}

std::span<const double> Tape::backward(const Var& root) {
  adjoint_.assign(n_nodes_, 0.0);
  if (!root.tracked()) return adjoint_;
  adjoint_[static_cast<std::size_t>(root.id)] = 1.0;
  double* adj = adjoint_.data();
  for (auto rec = records_.rbegin(); rec != records_.rend(); ++rec) {
    if (rec->kind == Kind::Scalar) {
      const double a = adj[rec->node];
      if (a == 0.0) continue;
      const std::uint32_t end = rec->begin + rec->count;
      for (std::uint32_t e = rec->begin; e < end; ++e)
        adj[edge_parent_[e]] += edge_partial_[e] * a;
      continue;
    }
    const DenseMeta& m = dense_[rec->begin];
    const std::int32_t* in_id = dense_in_id_.data() + m.in_begin;
    const double* in_val = dense_in_val_.data() + m.in_begin;
    for (std::uint32_t i = 0; i < m.rows; ++i) {
      const double a = adj[rec->node + i];
      if (a == 0.0) continue;
      adj[m.b_offset + i] += a;
      const double* w = m.params + m.w_offset + static_cast<std::size_t>(i) * m.cols;
      double* gw = adj + m.w_offset + static_cast<std::size_t>(i) * m.cols;
      for (std::uint32_t j = 0; j < m.cols; ++j) {
        gw[j] += a * in_val[j];
        if (in_id[j] >= 0) adj[in_id[j]] += a * w[j];
      }
    }
  }
  return adjoint_;
}

}  // namespace vcnf::ad
