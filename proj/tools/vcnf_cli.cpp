// vcnf: train, evaluate and inspect flow-based mean-field control solvers.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 numerical abort.

#include <omp.h>

#include <CLI11.hpp>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "vcnf/checkpoint.hpp"
#include "vcnf/experiment.hpp"
#include "vcnf/finite_diff.hpp"
#include "vcnf/oracles.hpp"
#include "vcnf/trainer.hpp"
#include "vcnf/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vcnf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number list: " + s);
    }
  }
  return out;
}

Eigen::MatrixXd square_from(const std::vector<double>& v) {
  const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != static_cast<Eigen::Index>(v.size())) throw ConfigError("matrix entries must form a square");
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = v[static_cast<std::size_t>(i * n + j)];
  return m;
}

struct OTCase {
  Eigen::Vector2d mu0, mu1;
  Eigen::Matrix2d S0, S1;
};

// Gaussian-to-Gaussian benchmark cases 1-7: shifted means for 1-4, centered for 5-7.
OTCase ot_case(int k) {
  if (k < 1 || k > 7) throw ConfigError("--case must be in 1..7");
  OTCase c;
  const bool shifted = k <= 4;
  c.mu0 = shifted ? Eigen::Vector2d(-3, -3) : Eigen::Vector2d::Zero();
  c.mu1 = shifted ? Eigen::Vector2d(3, 3) : Eigen::Vector2d::Zero();
  c.S1.setIdentity();
  switch (k) {
    case 1: c.S0.setIdentity(); break;
    case 2:
    case 5: c.S0 << 1, 0, 0, 0.25; break;
    case 3:
    case 6: c.S0 << 4, 1.5, 1.5, 3; break;
    default: c.S0 << 5, 1, 1, 0.5; break;
  }
  return c;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  file.open(path, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

json metrics_summary(const RunMetrics& m) {
  json rows = json::array();
  for (const auto& r : m.rows)
    rows.push_back({{"iteration", r.iteration}, {"total", r.total}, {"grad_norm", r.grad_norm}});
  return rows;
}

// ---- train ----

int cmd_train(const std::string& config, const std::vector<std::string>& sets, bool quiet) {
  const auto exp = load_experiment(config, sets);
  TrainOptions opts;
  opts.arch = exp.arch;
  opts.out_dir = exp.out_dir;
  opts.evaluate = false;
  if (!quiet)
    opts.on_log = [](const MetricRow& r) {
      std::fprintf(stderr, "it %7d  loss %.6g  kinetic %.6g  penalty %.6g  terminal %.6g  |g| %.3g  %.1fs\n",
                   r.iteration, r.total, r.kinetic, r.penalty, r.terminal, r.grad_norm, r.wall_seconds);
    };
  fs::create_directories(exp.out_dir);
  write_json(exp.out_dir / "config.json", exp.resolved);
  auto res = train(exp.problem, exp.train, opts);

  json summary = evaluate_experiment(res.model, exp);
  summary["name"] = exp.name;
  summary["seed"] = exp.train.seed;
  summary["config_hash"] = config_hash(exp.resolved);
  summary["config"] = exp.resolved;
  summary["final_loss"] = res.metrics.loss_history.back();
  summary["log"] = metrics_summary(res.metrics);
  write_json(exp.out_dir / "summary.json", summary);
  if (!quiet) std::cout << summary.dump(2) << '\n';
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& ckpt, const std::string& config, const std::vector<std::string>& sets,
             const std::string& out) {
  const auto exp = load_experiment(config, sets);
  auto c = load_checkpoint(ckpt);
  if (c.model.dim() != exp.problem.dim() || c.model.arch().horizon != exp.problem.horizon())
    throw ConfigError("checkpoint does not match the problem (dimension or horizon)");
  json summary = evaluate_experiment(c.model, exp);
  summary["name"] = exp.name;
  summary["seed"] = exp.train.seed;
  summary["config_hash"] = config_hash(exp.resolved);
  summary["checkpoint_step"] = c.step;
  std::ofstream file;
  open_out(out, file) << summary.dump(2) << '\n';
  return 0;
}

// ---- dump ----

std::vector<std::array<double, 2>> default_starts(const ProblemSpec* spec) {
  if (spec && spec->fp() && std::holds_alternative<SmilingDrift>(spec->fp()->drift))
    return {{{-3, -3}}, {{-3, 0}}, {{-3, 3}}, {{0, 3}}, {{3, 3}}, {{3, 0}}, {{3, -3}}};
  if (spec && spec->ot() && spec->ot()->p0.mixture())
    return {{{5, 0}}, {{3, 4}}, {{0, 5}}, {{-3, 4}}, {{-5, 0}}, {{-3, -4}}, {{0, -5}}, {{3, -4}}};
  return {{{-3, -3}}, {{-3, 3}}, {{3, 3}}, {{3, -3}}};
}

int cmd_dump(const std::string& ckpt, const std::string& what, const std::string& times_arg, int steps, double L,
             int n, const std::string& starts_arg, const std::string& config, int samples, std::uint64_t seed,
             const std::string& out) {
  const auto c = load_checkpoint(ckpt);
  const FlowModel& m = c.model;
  const double T = m.arch().horizon;
  std::optional<ExperimentConfig> exp;
  if (!config.empty()) exp = load_experiment(config);

  std::vector<double> times;
  if (!times_arg.empty()) {
    times = parse_list(times_arg);
  } else {
    for (int i = 0; i <= steps; ++i) times.push_back(T * i / steps);
  }
  for (double t : times)
    if (t < 0.0 || t > T) throw ConfigError("dump: times must lie in [0, T]");

  std::ofstream file;
  std::ostream& os = open_out(out, file);
  os.precision(10);

  if (what == "trajectories") {
    if (m.dim() != 2) throw ConfigError("dump trajectories: d = 2 only");
    std::vector<std::array<double, 2>> starts;
    if (!starts_arg.empty()) {
      const auto v = parse_list(starts_arg);
      if (v.size() % 2) throw ConfigError("--starts needs x1,x2 pairs");
      for (std::size_t i = 0; i < v.size(); i += 2) starts.push_back({{v[i], v[i + 1]}});
    } else {
      starts = default_starts(exp ? &exp->problem : nullptr);
    }
    os << "id,t,x1,x2\n";
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const auto z = flow_inverse(m, starts[k], 0.0).x;
      for (double t : times) {
        const auto x = flow_forward(m, z, t).x;
        os << k << ',' << t << ',' << x[0] << ',' << x[1] << '\n';
      }
    }
    return 0;
  }
  if (what == "density" || what == "velocity") {
    if (m.dim() != 2) throw ConfigError("dump " + what + ": d = 2 only");
    if (n < 2) throw ConfigError("--n must be >= 2");
    const double h = 2.0 * L / (n - 1);
    const bool vel = what == "velocity";
    os << (vel ? "x1,x2,t,v1,v2\n" : "x1,x2,t,density\n");
    const double dt = 1e-3 * T;
    for (double t : times) {
      const FlowAt<double> at(m, t);
      const FlowAt<double> plus(m, t + 0.5 * dt), minus(m, t - 0.5 * dt);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const std::array<double, 2> x{-L + i * h, -L + j * h};
          if (vel) {
            const auto z = at.inverse(x).x;
            const auto v = velocity_fd<double>(plus, minus, z, dt);
            os << x[0] << ',' << x[1] << ',' << t << ',' << v[0] << ',' << v[1] << '\n';
          } else {
            os << x[0] << ',' << x[1] << ',' << t << ',' << std::exp(at.log_density(x)) << '\n';
          }
        }
    }
    return 0;
  }
  if (what == "samples") {
    os << "t,id";
    for (int i = 0; i < m.dim(); ++i) os << ",x" << i + 1;
    os << '\n';
    for (double t : times) {
      auto rng = make_stream(seed, 0);
      const auto xs = sample(m, t, samples, rng);
      for (std::size_t k = 0; k < xs.size(); ++k) {
        os << t << ',' << k;
        for (double v : xs[k]) os << ',' << v;
        os << '\n';
      }
    }
    return 0;
  }
  throw ConfigError("dump: unknown target " + what + " (trajectories, density, velocity, samples)");
}

// ---- verify ----

int cmd_verify(const std::string& suite) {
  bool ok = true;
  run_verify_suite(suite, [&](const CheckResult& r) {
    std::printf("%-4s %-24s metric %.3e  tol %.1e  %6.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.metric,
                r.tolerance, r.seconds, r.detail.c_str());
    std::fflush(stdout);
    ok = ok && r.pass;
  });
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-based solvers for optimal transport, Wasserstein proximal and Fokker-Planck problems"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker cap (default: VCNF_THREADS, else OpenMP default)")->check(CLI::NonNegativeNumber);

  std::string config, ckpt, out, what, times, starts, suite = "all";
  std::vector<std::string> sets;
  bool quiet = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a recipe");
  train_cmd->add_option("config", config, "TOML recipe or resolved config.json")->required();
  train_cmd->add_option("--set", sets, "Override, e.g. train.steps=10");
  train_cmd->add_flag("--quiet", quiet, "No progress output");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("checkpoint", ckpt, "Checkpoint stem (without .json/.bin)")->required();
  eval_cmd->add_option("config", config, "Recipe describing the problem")->required();
  eval_cmd->add_option("--set", sets, "Override");
  eval_cmd->add_option("--out", out, "Output file (default stdout)");

  int steps = 20, n = 101, samples = 1000;
  double L = 5.0;
  std::uint64_t seed = 0;
  auto* dump_cmd = app.add_subcommand("dump", "Write CSV data from a checkpoint");
  dump_cmd->add_option("checkpoint", ckpt, "Checkpoint stem")->required();
  dump_cmd->add_option("what", what, "trajectories | density | velocity | samples")->required();
  dump_cmd->add_option("--times", times, "Comma-separated times (default: uniform grid)");
  dump_cmd->add_option("--steps", steps, "Time grid intervals when --times is absent")->check(CLI::PositiveNumber);
  dump_cmd->add_option("--L", L, "Grid half-width")->check(CLI::PositiveNumber);
  dump_cmd->add_option("--n", n, "Grid points per axis");
  dump_cmd->add_option("--starts", starts, "Trajectory start points x1,x2,x1,x2,...");
  dump_cmd->add_option("--config", config, "Recipe, used for default start points");
  dump_cmd->add_option("--samples", samples, "Samples per time")->check(CLI::PositiveNumber);
  dump_cmd->add_option("--seed", seed, "Sampling seed");
  dump_cmd->add_option("--out", out, "Output file (default stdout)");

  auto* verify_cmd = app.add_subcommand("verify", "Run property suites");
  verify_cmd->add_option("suite", suite, "spline | flow | diffkit | oracles | all");

  // oracle subcommands
  auto* oracle_cmd = app.add_subcommand("oracle", "Reference values as CSV");
  oracle_cmd->require_subcommand(1);
  int d = 2, ot_case_id = 0, paths = 100000;
  double beta = 1.0, T = 1.0, t = 0.0, a = 1.0, gamma = 1.0, m0 = -1.0, var0 = 1.0, delta = 0.5, dt = 1e-3;
  double x1 = 0.0, x2 = 0.0;
  std::string mu0s, mu1s, cov0s, cov1s, potential = "quadratic";

  auto* o_rwpo = oracle_cmd->add_subcommand("rwpo-cost", "d/beta (log(T+1) + 1)");
  o_rwpo->add_option("--d", d);
  o_rwpo->add_option("--beta", beta);
  o_rwpo->add_option("--T", T);

  auto* o_w2 = oracle_cmd->add_subcommand("w2", "Half squared W2 between Gaussians");
  o_w2->add_option("--case", ot_case_id, "Benchmark case 1..7");
  o_w2->add_option("--mu0", mu0s);
  o_w2->add_option("--mu1", mu1s);
  o_w2->add_option("--cov0", cov0s, "Row-major entries");
  o_w2->add_option("--cov1", cov1s, "Row-major entries");

  auto* o_ou = oracle_cmd->add_subcommand("ou-moment", "E|x_t|^2 for the OU process");
  o_ou->add_option("--t", t);
  o_ou->add_option("--a", a);
  o_ou->add_option("--gamma", gamma);
  o_ou->add_option("--m0", m0, "E|x_0|^2 (default d * var0)");
  o_ou->add_option("--var0", var0);
  o_ou->add_option("--d", d);

  auto* o_em = oracle_cmd->add_subcommand("ou-em", "Euler-Maruyama estimate of E|x_t|^2");
  o_em->add_option("--t", t);
  o_em->add_option("--a", a);
  o_em->add_option("--gamma", gamma);
  o_em->add_option("--var0", var0);
  o_em->add_option("--d", d);
  o_em->add_option("--paths", paths);
  o_em->add_option("--dt", dt);
  o_em->add_option("--seed", seed);

  auto* o_kernel = oracle_cmd->add_subcommand("kernel-cost", "RWPO optimal cost by kernel quadrature, p0 = N(0, var0 I)");
  o_kernel->add_option("--potential", potential, "quadratic | double-well");
  o_kernel->add_option("--a", a);
  o_kernel->add_option("--beta", beta);
  o_kernel->add_option("--T", T);
  o_kernel->add_option("--var0", var0);
  o_kernel->add_option("--d", d);

  auto* o_dot = oracle_cmd->add_subcommand("discrete-ot", "Assignment cost between samples of a benchmark case");
  o_dot->add_option("--case", ot_case_id)->required();
  o_dot->add_option("--n", n);
  o_dot->add_option("--seed", seed);

  auto* o_stat = oracle_cmd->add_subcommand("stationarity", "Residual of the smiling stationary equation");
  o_stat->add_option("--delta", delta);
  o_stat->add_option("--gamma", gamma);
  o_stat->add_option("--x1", x1);
  o_stat->add_option("--x2", x2);

  CLI11_PARSE(app, argc, argv);

  if (threads == 0) {
    if (const char* env = std::getenv("VCNF_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) omp_set_num_threads(threads);
  auto with_threads = [&](std::vector<std::string> s) {
    if (threads > 0) s.push_back("train.threads=" + std::to_string(threads));
    return s;
  };

  try {
    if (*train_cmd) return cmd_train(config, with_threads(sets), quiet);
    if (*eval_cmd) return cmd_eval(ckpt, config, with_threads(sets), out);
    if (*dump_cmd) return cmd_dump(ckpt, what, times, steps, L, n, starts, config, samples, seed, out);
    if (*verify_cmd) return cmd_verify(suite);

    std::cout << "name,inputs,value,error\n";
    char in[256];
    if (*o_rwpo) {
      std::snprintf(in, sizeof in, "d=%d beta=%g T=%g", d, beta, T);
      std::cout << oracle_csv_row("rwpo-cost", in, rwpo_quadratic_cost(d, beta, T), 0.0) << '\n';
    } else if (*o_w2) {
      Eigen::VectorXd mu0, mu1;
      Eigen::MatrixXd S0, S1;
      if (ot_case_id) {
        const auto c = ot_case(ot_case_id);
        mu0 = c.mu0, mu1 = c.mu1, S0 = c.S0, S1 = c.S1;
        std::snprintf(in, sizeof in, "case=%d", ot_case_id);
      } else {
        const auto v0 = parse_list(mu0s), v1 = parse_list(mu1s);
        mu0 = Eigen::Map<const Eigen::VectorXd>(v0.data(), static_cast<Eigen::Index>(v0.size()));
        mu1 = Eigen::Map<const Eigen::VectorXd>(v1.data(), static_cast<Eigen::Index>(v1.size()));
        S0 = square_from(parse_list(cov0s));
        S1 = square_from(parse_list(cov1s));
        std::snprintf(in, sizeof in, "mu0=%s mu1=%s cov0=%s cov1=%s", mu0s.c_str(), mu1s.c_str(), cov0s.c_str(),
                      cov1s.c_str());
      }
      std::cout << oracle_csv_row("w2", in, 0.5 * gaussian_w2sq(mu0, S0, mu1, S1), 0.0) << '\n';
    } else if (*o_ou) {
      const double m = m0 >= 0.0 ? m0 : d * var0;
      std::snprintf(in, sizeof in, "t=%g a=%g gamma=%g m0=%g d=%d", t, a, gamma, m, d);
      std::cout << oracle_csv_row("ou-moment", in, ou_second_moment(t, a, gamma, m, d), 0.0) << '\n';
    } else if (*o_em) {
      const auto e = ou_second_moment_em(t, a, gamma, var0, d, paths, dt, seed);
      std::snprintf(in, sizeof in, "t=%g a=%g gamma=%g var0=%g d=%d paths=%d dt=%g", t, a, gamma, var0, d, paths, dt);
      std::cout << oracle_csv_row("ou-em", in, e.mean, e.se) << '\n';
    } else if (*o_kernel) {
      Potential V = QuadraticPotential{};
      if (potential == "double-well") V = DoubleWellPotential{a};
      else if (potential != "quadratic") throw ConfigError("--potential must be quadratic or double-well");
      QuadratureSpec q;
      if (potential == "double-well") q.L = 6.0;
      const auto k = kernel_optimal_cost(Gaussian::isotropic(d, var0), V, beta, T, q);
      std::snprintf(in, sizeof in, "potential=%s a=%g beta=%g T=%g var0=%g d=%d", potential.c_str(), a, beta, T,
                    var0, d);
      std::cout << oracle_csv_row("kernel-cost", in, k.value, k.max_shell_fraction) << '\n';
    } else if (*o_dot) {
      const auto c = ot_case(ot_case_id);
      const Gaussian g0(c.mu0, c.S0), g1(c.mu1, c.S1);
      auto rng = make_stream(seed, 0);
      Eigen::MatrixXd A(n, 2), B(n, 2);
      for (int i = 0; i < n; ++i) {
        std::array<double, 2> x{};
        g0.sample(rng, x);
        A.row(i) << x[0], x[1];
        g1.sample(rng, x);
        B.row(i) << x[0], x[1];
      }
      std::snprintf(in, sizeof in, "case=%d n=%d seed=%llu", ot_case_id, n, static_cast<unsigned long long>(seed));
      std::cout << oracle_csv_row("discrete-ot", in, discrete_ot_cost(A, B), 0.0) << '\n';
    } else if (*o_stat) {
      const std::array<double, 2> x{x1, x2};
      std::snprintf(in, sizeof in, "delta=%g gamma=%g x=(%g,%g)", delta, gamma, x1, x2);
      std::cout << oracle_csv_row("stationarity", in, stationarity_residual(delta, gamma, x), 0.0) << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingAborted& e) {
    std::cerr << "numerical abort: " << e.what();
    if (!e.last_checkpoint().empty()) std::cerr << " (last good checkpoint: " << e.last_checkpoint() << ")";
    std::cerr << '\n';
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
