#include "vcnf/loss.hpp"

#include <omp.h>

#include <algorithm>

namespace vcnf {

namespace {

void fill_points(const Distribution& dist, int n, std::mt19937_64& rng, std::vector<double>& out) {
  const auto d = static_cast<std::size_t>(dist.dim());
  out.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) dist.sample(rng, std::span<double>(out.data() + static_cast<std::size_t>(i) * d, d));
}

void fill_normal(int n, int d, std::mt19937_64& rng, std::vector<double>& out) {
  std::normal_distribution<double> normal;
  out.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
  for (auto& v : out) v = normal(rng);
}

void add_chunks(std::vector<WorkItem>& items, ItemKind kind, int n, int chunk) {
  for (int b = 0; b < n; b += chunk) items.push_back({kind, b, std::min(n, b + chunk)});
}

template <class S>
S item_total(const LossTerms<S>& t) {
  return t.kinetic + t.penalty + t.terminal;
}

}  // namespace

LossBatch draw_batch(const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng) {
  LossBatch b;
  b.dim = spec.dim();
  std::uniform_real_distribution<double> u(0.0, spec.horizon());
  b.times.resize(static_cast<std::size_t>(cfg.n_t));
  for (auto& t : b.times) t = u(rng);
  fill_normal(cfg.n_t * cfg.n_k, b.dim, rng, b.latents);
  fill_points(spec.initial(), cfg.n_b, rng, b.initial);
  if (const auto* o = spec.ot()) fill_points(o->p1, cfg.n_b, rng, b.target);
  if (spec.rwpo()) fill_normal(cfg.n_1, b.dim, rng, b.terminal);
  return b;
}

std::vector<WorkItem> plan_items(const ProblemSpec& spec, const TrainConfig& cfg, const LossBatch& batch) {
  std::vector<WorkItem> items;
  for (int i = 0; i < static_cast<int>(batch.times.size()); ++i) items.push_back({ItemKind::Kinetic, i, i + 1});
  if (cfg.lambda > 0.0) {
    add_chunks(items, ItemKind::Initial, cfg.n_b, cfg.penalty_chunk);
    if (spec.ot()) add_chunks(items, ItemKind::Target, cfg.n_b, cfg.penalty_chunk);
  }
  if (spec.rwpo()) add_chunks(items, ItemKind::Terminal, cfg.n_1, cfg.penalty_chunk);
  return items;
}

LossParts loss_value(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, const LossBatch& batch) {
  const auto items = plan_items(spec, cfg, batch);
  std::vector<LossTerms<double>> terms(items.size());
  const int n = static_cast<int>(items.size());
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < n; ++i) terms[static_cast<std::size_t>(i)] = eval_item<double>(m, spec, cfg, batch, items[static_cast<std::size_t>(i)]);
  LossParts parts;
  for (const auto& t : terms) {
    parts.kinetic += t.kinetic;
    parts.penalty += t.penalty;
    parts.terminal += t.terminal;
  }
  return parts;
}

LossGrad loss_grad_parallel(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg,
                            const LossBatch& batch) {
  const auto items = plan_items(spec, cfg, batch);
  const std::size_t P = m.n_params();
  const int n = static_cast<int>(items.size());
  std::vector<LossTerms<double>> terms(items.size());
  std::vector<std::vector<double>> grads(items.size());
  std::vector<const char*> failures(items.size(), nullptr);
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();

#pragma omp parallel num_threads(threads)
  {
    ad::Tape tape;
#pragma omp for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      tape.reset(P);
      ad::TapeScope scope(tape);
      const auto t = eval_item<Var>(m, spec, cfg, batch, items[ui]);
      terms[ui] = {t.kinetic.v, t.penalty.v, t.terminal.v};
      failures[ui] = tape.failed_primitive();
      const Var total = item_total(t);
      auto adj = tape.backward(total);
      grads[ui].assign(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(P));
    }
  }

  for (const char* f : failures)
    if (f != nullptr) throw ad::GradientError(f);

  LossGrad out;
  out.grad.assign(P, 0.0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.parts.kinetic += terms[i].kinetic;
    out.parts.penalty += terms[i].penalty;
    out.parts.terminal += terms[i].terminal;
    for (std::size_t k = 0; k < P; ++k) out.grad[k] += grads[i][k];
  }
  return out;
}

LossGrad loss_grad_serial(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg,
                          const LossBatch& batch) {
  const auto items = plan_items(spec, cfg, batch);
  LossGrad out;
  auto r = grad(
      [&](std::span<const double>) {
        Var kinetic = 0.0, penalty = 0.0, terminal = 0.0;
        for (const auto& item : items) {
          const auto t = eval_item<Var>(m, spec, cfg, batch, item);
          kinetic = kinetic + t.kinetic;
          penalty = penalty + t.penalty;
          terminal = terminal + t.terminal;
        }
        out.parts = {kinetic.v, penalty.v, terminal.v};
        return kinetic + penalty + terminal;
      },
      m.params());
  out.grad = std::move(r.grad);
  return out;
}

namespace {

double checked_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto batch = draw_batch(spec, cfg, rng);
  return loss_value(m, spec, cfg, batch).total();
}

}  // namespace

double ot_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (!spec.ot()) throw ConfigError("ot_loss: problem is not OT");
  return checked_loss(m, spec, cfg, rng);
}

double rwpo_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (!spec.rwpo()) throw ConfigError("rwpo_loss: problem is not RWPO");
  return checked_loss(m, spec, cfg, rng);
}

double fp_match_loss(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (!spec.fp()) throw ConfigError("fp_match_loss: problem is not FP matching");
  return checked_loss(m, spec, cfg, rng);
}

}  // namespace vcnf
