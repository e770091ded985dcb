#pragma once

// Monte Carlo loss estimators and the batch kernels that evaluate them.
//
// A loss is split into work items (one per sampled time point for the running
// cost, fixed-size chunks for boundary and terminal terms). Items are
// independent, so the parallel kernel gives each one its own tape and sums
// item results in index order; the answer does not depend on thread count.
// The serial kernel records the whole loss on a single tape and is kept as the
// reference the parallel one is tested against.

#include <random>
#include <span>
#include <vector>

#include "vcnf/finite_diff.hpp"
#include "vcnf/flow.hpp"
#include "vcnf/problems.hpp"
#include "vcnf/train_config.hpp"

namespace vcnf {

/// Samples for one loss evaluation. Point sets are row-major (n x d).
struct LossBatch {
  int dim = 0;
  std::vector<double> times;     // n_t, uniform on [0, T]
  std::vector<double> latents;   // n_t * n_k points from q
  std::vector<double> initial;   // n_b points from p0
  std::vector<double> target;    // n_b points from p1 (OT only)
  std::vector<double> terminal;  // n_1 latents from q (RWPO only)
};

LossBatch draw_batch(const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng);

struct LossParts {
  double kinetic = 0.0;
  double penalty = 0.0;
  double terminal = 0.0;
  double total() const noexcept { return kinetic + penalty + terminal; }
};

struct LossGrad {
  LossParts parts;
  std::vector<double> grad;
};

enum class ItemKind { Kinetic, Initial, Target, Terminal };

struct WorkItem {
  ItemKind kind;
  int begin;  // time index for Kinetic, sample range otherwise
  int end;
};

std::vector<WorkItem> plan_items(const ProblemSpec& spec, const TrainConfig& cfg, const LossBatch& batch);

template <class S>
struct LossTerms {
  S kinetic = 0.0;
  S penalty = 0.0;
  S terminal = 0.0;
};

// Running-cost integrands. v is the finite-difference velocity, s the
// finite-difference score at x = f(z, t).

template <class S>
S ot_integrand(std::span<const S> v) {
  S acc = 0.0;
  for (const auto& c : v) acc = acc + square(c);
  return 0.5 * acc;
}

/// |v + s / beta|^2 (the 1/2 and T factors are applied by the caller).
template <class S>
S rwpo_integrand(std::span<const S> v, std::span<const S> s, double beta) {
  S acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc = acc + square(v[i] + s[i] / beta);
  return acc;
}

/// |v - b(x) + gamma s|^2
template <class S>
S fp_integrand(std::span<const S> v, std::span<const S> x, std::span<const S> s, const DriftField& drift,
               double gamma) {
  const auto b = drift_eval<S>(drift, x);
  S acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc = acc + square(v[i] - b[i] + gamma * s[i]);
  return acc;
}

template <class S>
LossTerms<S> eval_item(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg,
                       const LossBatch& batch, const WorkItem& item) {
  const auto d = static_cast<std::size_t>(batch.dim);
  const double T = spec.horizon();
  LossTerms<S> out;
  std::vector<S> z(d);
  auto load = [&](const std::vector<double>& pts, int i) {
    for (std::size_t c = 0; c < d; ++c) z[c] = S(pts[static_cast<std::size_t>(i) * d + c]);
  };

  switch (item.kind) {
    case ItemKind::Kinetic: {
      const double t = batch.times[static_cast<std::size_t>(item.begin)];
      const double dt = cfg.dt(T);
      const FlowAt<S> plus(m, t + 0.5 * dt);
      const FlowAt<S> minus(m, t - 0.5 * dt);
      const double n_total = static_cast<double>(cfg.n_t) * cfg.n_k;
      const int first = item.begin * cfg.n_k;
      S acc = 0.0;
      if (spec.ot()) {
        for (int j = 0; j < cfg.n_k; ++j) {
          load(batch.latents, first + j);
          const auto v = velocity_fd<S>(plus, minus, z, dt);
          acc = acc + ot_integrand<S>(v);
        }
        out.kinetic = acc / n_total;
        break;
      }
      const FlowAt<S> at(m, t);
      for (int j = 0; j < cfg.n_k; ++j) {
        load(batch.latents, first + j);
        const auto v = velocity_fd<S>(plus, minus, z, dt);
        const auto x = at.forward(z).x;
        const auto s = score_fd<S>(at, x, cfg.dx);
        if (const auto* r = spec.rwpo())
          acc = acc + rwpo_integrand<S>(v, s, r->beta);
        else
          acc = acc + fp_integrand<S>(v, x, s, spec.fp()->drift, spec.fp()->gamma);
      }
      out.kinetic = spec.rwpo() ? acc * (T / (2.0 * n_total)) : acc / n_total;
      break;
    }
    case ItemKind::Initial:
    case ItemKind::Target: {
      const bool initial = item.kind == ItemKind::Initial;
      const FlowAt<S> at(m, initial ? 0.0 : T);
      const auto& pts = initial ? batch.initial : batch.target;
      S acc = 0.0;
      for (int j = item.begin; j < item.end; ++j) {
        load(pts, j);
        acc = acc - at.log_density(z);
      }
      out.penalty = acc * (cfg.lambda / static_cast<double>(cfg.n_b));
      break;
    }
    case ItemKind::Terminal: {
      const auto& V = spec.rwpo()->potential;
      const FlowAt<S> at(m, T);
      S acc = 0.0;
      for (int j = item.begin; j < item.end; ++j) {
        load(batch.terminal, j);
        const auto x = at.forward(z).x;
        acc = acc + potential_eval<S>(V, x);
      }
      out.terminal = acc / static_cast<double>(cfg.n_1);
      break;
    }
  }
  return out;
}

/// Loss value only (no tape), parallel over items.
LossParts loss_value(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, const LossBatch& batch);

/// Value and gradient, one tape per work item, fixed-order reduction.
LossGrad loss_grad_parallel(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg,
                            const LossBatch& batch);

/// Value and gradient recorded on a single tape. Reference implementation.
LossGrad loss_grad_serial(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg,
                          const LossBatch& batch);

// Problem-specific estimators: draw a batch from rng and evaluate.
double ot_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng);
double rwpo_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng);
double fp_match_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng);

}  // namespace vcnf
