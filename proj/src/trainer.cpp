#include "vcnf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vcnf/checkpoint.hpp"
#include "vcnf/loss.hpp"

namespace vcnf {

namespace fs = std::filesystem;

// RNG stream ids derived from cfg.seed.
constexpr std::uint64_t kBatchStream = 0;
constexpr std::uint64_t kEvalStream = 1;

void adam_step(std::vector<double>& params, std::span<const double> grad, AdamState& s, const TrainConfig& cfg) {
  if (grad.size() != params.size()) throw ContractError("adam_step: gradient length mismatch");
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = b1 * s.m[i] + (1.0 - b1) * grad[i];
    s.v[i] = b2 * s.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= cfg.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg.adam_eps);
  }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (double& g : grad) g *= k;
  }
  return norm;
}

namespace {

std::string format_row(const MetricRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", r.iteration, r.total, r.kinetic,
                r.penalty, r.terminal, r.grad_norm, r.wall_seconds);
  return buf;
}

}  // namespace

TrainResult train(const ProblemSpec& spec, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  Architecture arch = opts.arch;
  arch.dim = spec.dim();
  arch.horizon = spec.horizon();
  arch.validate();

  FlowModel model(arch, cfg.seed);
  RunMetrics metrics;
  metrics.benchmark = opts.benchmark;
  metrics.loss_history.reserve(static_cast<std::size_t>(cfg.steps));

  std::ofstream csv;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir / "checkpoints");
    csv.open(opts.out_dir / "metrics.csv", std::ios::trunc);
    csv << kMetricsHeader << '\n';
  }
  std::string last_ckpt;

  auto rng = make_stream(cfg.seed, kBatchStream);
  AdamState adam;
  const auto t0 = std::chrono::steady_clock::now();

  for (int it = 1; it <= cfg.steps; ++it) {
    const auto batch = draw_batch(spec, cfg, rng);
    LossGrad lg;
    try {
      lg = loss_grad_parallel(model, spec, cfg, batch);
    } catch (const std::domain_error& e) {
      throw TrainingAborted("iteration " + std::to_string(it) + ": " + e.what(), last_ckpt);
    }
    const double total = lg.parts.total();
    bool finite = std::isfinite(total);
    for (double g : lg.grad) finite = finite && std::isfinite(g);
    if (!finite) throw TrainingAborted("iteration " + std::to_string(it) + ": non-finite loss or gradient", last_ckpt);

    const double gnorm = clip_global_norm(lg.grad, cfg.clip_norm);
    adam_step(model.mutable_params(), lg.grad, adam, cfg);
    metrics.loss_history.push_back(total);

    if (it % cfg.eval_every == 0 || it == cfg.steps || it == 1) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      MetricRow row{it, total, lg.parts.kinetic, lg.parts.penalty, lg.parts.terminal, gnorm, wall};
      metrics.rows.push_back(row);
      if (csv.is_open()) csv << format_row(row) << std::endl;
      if (opts.on_log) opts.on_log(row);
    }
    if (!opts.out_dir.empty() && (it % cfg.checkpoint_every == 0 || it == cfg.steps)) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%07d", it);
      const auto stem = opts.out_dir / "checkpoints" / name;
      save_checkpoint(stem, model, it);
      last_ckpt = stem.string();
    }
  }

  if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "model", model, cfg.steps);

  if (opts.evaluate) {
    const auto rep = objective_eval(model, spec, cfg, cfg.n_eval, make_stream(cfg.seed, kEvalStream)());
    metrics.objective = rep;
    if (opts.benchmark && *opts.benchmark != 0.0)
      metrics.rel_error = std::abs(rep.total.mean - *opts.benchmark) / std::abs(*opts.benchmark);
  }
  return {std::move(model), std::move(metrics)};
}

}  // namespace vcnf
