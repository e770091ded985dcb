#include "vcnf/objective.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "vcnf/loss.hpp"

namespace vcnf {

namespace {

constexpr std::uint64_t kTerminalStream = 1u << 20;

struct Moments {
  double sum = 0.0;
  double sq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sq += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double var() const { return n > 1 ? std::max(0.0, (sq - sum * sum / n) / (n - 1)) : 0.0; }
};

Moments stratum(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, int cell, int cells,
                int n, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(spec.dim());
  const double T = spec.horizon();
  auto rng = make_stream(seed, static_cast<std::uint64_t>(cell));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  const double t = (cell + u(rng)) * T / cells;
  const double dt = cfg.dt(T);
  const FlowAt<double> plus(m, t + 0.5 * dt), minus(m, t - 0.5 * dt), at(m, t);

  Moments mo;
  std::vector<double> z(d);
  for (int j = 0; j < n; ++j) {
    for (auto& c : z) c = normal(rng);
    const auto v = velocity_fd<double>(plus, minus, z, dt);
    double val;
    if (spec.ot()) {
      val = ot_integrand<double>(v);
    } else {
      const auto x = at.forward(z).x;
      const auto s = score_fd<double>(at, x, cfg.dx);
      if (const auto* r = spec.rwpo())
        val = 0.5 * rwpo_integrand<double>(v, s, r->beta);
      else
        val = fp_integrand<double>(v, x, s, spec.fp()->drift, spec.fp()->gamma);
    }
    if (!std::isfinite(val)) throw NumericError("objective_eval: non-finite integrand");
    mo.add(val);
  }
  return mo;
}

}  // namespace

ObjectiveReport objective_eval(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, int n_eval,
                               std::uint64_t seed) {
  if (n_eval < 1000) throw ConfigError("objective_eval: n_eval must be >= 1000");
  const int cells = cfg.eval_time_points;
  if (cells < 1) throw ConfigError("objective_eval: eval_time_points must be >= 1");
  const int per = std::max(2, n_eval / cells);
  const double T = spec.horizon();

  std::vector<Moments> mo(static_cast<std::size_t>(cells));
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int c = 0; c < cells; ++c) mo[static_cast<std::size_t>(c)] = stratum(m, spec, cfg, c, cells, per, seed);

  // Stratified estimator: the time integral is T times the mean of the cell means.
  ObjectiveReport rep;
  double mean = 0.0, var = 0.0;
  for (const auto& s : mo) {
    mean += s.mean();
    var += s.var() / s.n;
  }
  const double scale = spec.fp() ? 1.0 / cells : T / cells;
  rep.running = {mean * scale, std::sqrt(var) * scale};

  if (const auto* r = spec.rwpo()) {
    auto rng = make_stream(seed, kTerminalStream);
    std::normal_distribution<double> normal;
    const FlowAt<double> at(m, T);
    std::vector<double> z(static_cast<std::size_t>(spec.dim()));
    Moments tm;
    for (int j = 0; j < n_eval; ++j) {
      for (auto& c : z) c = normal(rng);
      tm.add(potential_eval(r->potential, at.forward(z).x));
    }
    rep.terminal = {tm.mean(), std::sqrt(tm.var() / tm.n)};
  }
  rep.total = {rep.running.mean + rep.terminal.mean, std::hypot(rep.running.se, rep.terminal.se)};
  return rep;
}

ObjectiveReport objective_eval(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, int n_eval,
                               std::mt19937_64& rng) {
  return objective_eval(m, spec, cfg, n_eval, rng());
}

}  // namespace vcnf
