#include "vcnf/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "vcnf/objective.hpp"

namespace vcnf {

using nlohmann::json;

namespace {

json node_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    json o = json::object();
    for (auto&& [k, v] : *t) o[std::string(k.str())] = node_to_json(v);
    return o;
  }
  if (const auto* a = n.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(node_to_json(v));
    return arr;
  }
  if (const auto* s = n.as_string()) return s->get();
  if (const auto* i = n.as_integer()) return i->get();
  if (const auto* f = n.as_floating_point()) return f->get();
  if (const auto* b = n.as_boolean()) return b->get();
  throw ConfigError("config: unsupported TOML value type (dates are not accepted)");
}

/// Reads keys from one JSON object and remembers which were used.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: [" + path_ + "] must be a table");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  template <class T>
  T get(const std::string& k, T fallback) {
    used_.insert(k);
    if (!j_.contains(k)) return fallback;
    return read<T>(k);
  }

  template <class T>
  T require(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) throw ConfigError("config: missing " + key(k));
    return read<T>(k);
  }

  Section sub(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) throw ConfigError("config: missing table " + key(k));
    return Section(j_.at(k), key(k));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("config: unknown key " + key(k));
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  template <class T>
  T read(const std::string& k) const {
    const json& v = j_.at(k);
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError("config: " + key(k) + " must be an integer");
        return v.get<int>();
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("config: " + key(k) + " must be a number");
        return v.get<double>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("config: " + key(k) + " must be a string");
        return v.get<std::string>();
      } else {
        return v.get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError("config: " + key(k) + ": " + e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Eigen::VectorXd to_vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

Eigen::MatrixXd to_mat(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw ConfigError("config: covariance must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

// Reads a distribution table; appends its resolved form to out.
Distribution read_distribution(Section s, json& out) {
  const auto type = s.require<std::string>("type");
  try {
    if (type == "gaussian") {
      const auto mean = s.require<std::vector<double>>("mean");
      const auto cov = s.require<std::vector<std::vector<double>>>("cov");
      s.finish();
      if (cov.size() != mean.size()) throw ConfigError("config: " + s.key("cov") + " does not match mean");
      out = {{"type", type}, {"mean", mean}, {"cov", cov}};
      return Gaussian(to_vec(mean), to_mat(cov));
    }
    if (type == "isotropic") {
      const int dim = s.require<int>("dim");
      const double var = s.require<double>("var");
      const double center = s.get<double>("center", 0.0);
      s.finish();
      out = {{"type", type}, {"dim", dim}, {"var", var}, {"center", center}};
      return Gaussian::isotropic(dim, var, center);
    }
    if (type == "ring") {
      s.finish();
      out = {{"type", type}};
      return ring_mixture();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config: " + s.key("type") + " must be gaussian, isotropic or ring");
}

ProblemSpec read_problem(Section s, json& out) {
  const auto kind = s.require<std::string>("kind");
  out = {{"kind", kind}};
  json p0j;
  Distribution p0 = read_distribution(s.sub("p0"), p0j);
  out["p0"] = p0j;
  try {
    if (kind == "ot") {
      json p1j;
      Distribution p1 = read_distribution(s.sub("p1"), p1j);
      out["p1"] = p1j;
      s.finish();
      return OTProblem{std::move(p0), std::move(p1)};
    }
    if (kind == "rwpo") {
      RWPOProblem p{std::move(p0), QuadraticPotential{}, s.get<double>("beta", 1.0), s.get<double>("horizon", 1.0)};
      const auto pot = s.get<std::string>("potential", "quadratic");
      out["beta"] = p.beta;
      out["horizon"] = p.horizon;
      out["potential"] = pot;
      if (pot == "double-well") {
        const double a = s.get<double>("a", 1.0);
        p.potential = DoubleWellPotential{a};
        out["a"] = a;
      } else if (pot != "quadratic") {
        throw ConfigError("config: problem.potential must be quadratic or double-well");
      }
      s.finish();
      return p;
    }
    if (kind == "fp") {
      FPMatchProblem p{std::move(p0), OUDrift{}, s.get<double>("gamma", 1.0), s.get<double>("horizon", 1.0), {}};
      const auto drift = s.require<std::string>("drift");
      out["gamma"] = p.gamma;
      out["horizon"] = p.horizon;
      out["drift"] = drift;
      if (drift == "ou") {
        const double a = s.get<double>("a", 1.0);
        p.drift = OUDrift{a};
        out["a"] = a;
      } else if (drift == "smiling") {
        const double delta = s.get<double>("delta", 0.5);
        p.drift = SmilingDrift{delta};
        out["delta"] = delta;
      } else {
        throw ConfigError("config: problem.drift must be ou or smiling");
      }
      s.finish();
      return p;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config: problem.kind must be ot, rwpo or fp");
}

Architecture read_model(const json& tree, json& out) {
  Architecture a;
  if (tree.contains("model")) {
    Section s(tree.at("model"), "model");
    a.layers = s.get<int>("layers", a.layers);
    a.hidden = s.get<std::vector<int>>("hidden", a.hidden);
    a.spline.bins = s.get<int>("bins", a.spline.bins);
    a.spline.bound = s.get<double>("bound", a.spline.bound);
    a.spline.min_bin_fraction = s.get<double>("min_bin_fraction", a.spline.min_bin_fraction);
    a.spline.min_derivative = s.get<double>("min_derivative", a.spline.min_derivative);
    s.finish();
  }
  out = {{"layers", a.layers},
         {"hidden", a.hidden},
         {"bins", a.spline.bins},
         {"bound", a.spline.bound},
         {"min_bin_fraction", a.spline.min_bin_fraction},
         {"min_derivative", a.spline.min_derivative}};
  return a;
}

TrainConfig read_train(const json& tree, json& out) {
  TrainConfig c;
  if (tree.contains("train")) {
    Section s(tree.at("train"), "train");
    c.steps = s.get<int>("steps", c.steps);
    c.lr = s.get<double>("lr", c.lr);
    c.adam_beta1 = s.get<double>("adam_beta1", c.adam_beta1);
    c.adam_beta2 = s.get<double>("adam_beta2", c.adam_beta2);
    c.adam_eps = s.get<double>("adam_eps", c.adam_eps);
    c.lambda = s.get<double>("lambda", c.lambda);
    c.n_t = s.get<int>("n_t", c.n_t);
    c.n_k = s.get<int>("n_k", c.n_k);
    c.n_b = s.get<int>("n_b", c.n_b);
    c.n_1 = s.get<int>("n_1", c.n_1);
    c.dt_fraction = s.get<double>("dt_fraction", c.dt_fraction);
    c.dx = s.get<double>("dx", c.dx);
    const auto seed = s.get<std::int64_t>("seed", 0);
    if (seed < 0) throw ConfigError("config: train.seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.eval_every = s.get<int>("eval_every", c.eval_every);
    c.checkpoint_every = s.get<int>("checkpoint_every", c.checkpoint_every);
    c.clip_norm = s.get<double>("clip_norm", c.clip_norm);
    c.n_eval = s.get<int>("n_eval", c.n_eval);
    c.eval_time_points = s.get<int>("eval_time_points", c.eval_time_points);
    c.penalty_chunk = s.get<int>("penalty_chunk", c.penalty_chunk);
    c.threads = s.get<int>("threads", c.threads);
    s.finish();
  }
  c.validate();
  out = {{"steps", c.steps},
         {"lr", c.lr},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_eps", c.adam_eps},
         {"lambda", c.lambda},
         {"n_t", c.n_t},
         {"n_k", c.n_k},
         {"n_b", c.n_b},
         {"n_1", c.n_1},
         {"dt_fraction", c.dt_fraction},
         {"dx", c.dx},
         {"seed", static_cast<std::int64_t>(c.seed)},
         {"eval_every", c.eval_every},
         {"checkpoint_every", c.checkpoint_every},
         {"clip_norm", c.clip_norm},
         {"n_eval", c.n_eval},
         {"eval_time_points", c.eval_time_points},
         {"penalty_chunk", c.penalty_chunk},
         {"threads", c.threads}};
  return c;
}

json parse_override_value(const std::string& text) {
  try {
    const auto t = toml::parse("v = " + text);
    return node_to_json(*t.get("v"));
  } catch (const toml::parse_error&) {
    return text;  // bare word: treat as a string
  }
}

void apply_override(json& tree, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("config: override must be key=value: " + spec);
  const std::string key = spec.substr(0, eq);
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("config: bad override key " + key);
    if (!node->is_object()) throw ConfigError("config: override " + key + " descends into a non-table");
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(spec.substr(eq + 1));
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace

json toml_to_json(const std::string& text, const std::string& source) {
  try {
    return node_to_json(toml::parse(text, source));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json tree;
  if (path.extension() == ".json") {
    try {
      tree = json::parse(ss.str());
    } catch (const json::exception& e) {
      throw ConfigError("config: " + path.string() + ": " + e.what());
    }
  } else {
    tree = toml_to_json(ss.str(), path.string());
  }
  return experiment_from_json(std::move(tree), overrides);
}

ExperimentConfig experiment_from_json(json tree, const std::vector<std::string>& overrides) {
  if (!tree.is_object()) throw ConfigError("config: top level must be a table");
  for (const auto& o : overrides) apply_override(tree, o);

  Section top(tree, "");
  const auto name = top.get<std::string>("name", "experiment");
  json resolved{{"name", name}};
  json pj, mj, tj;
  ProblemSpec problem = read_problem(top.sub("problem"), pj);
  top.get<json>("model", json::object());
  top.get<json>("train", json::object());
  Architecture arch = read_model(tree, mj);
  TrainConfig train = read_train(tree, tj);
  std::string dir = "runs/" + name;
  if (tree.contains("output")) {
    Section o = top.sub("output");
    dir = o.get<std::string>("dir", dir);
    o.finish();
  }
  top.finish();

  arch.dim = problem.dim();
  arch.horizon = problem.horizon();
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  resolved["problem"] = pj;
  resolved["model"] = mj;
  resolved["train"] = tj;
  resolved["output"] = {{"dir", dir}};
  return {name, std::move(problem), std::move(arch), train, dir, std::move(resolved)};
}

std::string config_hash(const json& resolved) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : resolved.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

QuadratureSpec default_quadrature(const ProblemSpec& spec) {
  QuadratureSpec q;
  if (const auto* r = spec.rwpo(); r && std::holds_alternative<DoubleWellPotential>(r->potential)) q.L = 6.0;
  return q;
}

std::optional<double> objective_benchmark(const ProblemSpec& spec) {
  if (const auto* o = spec.ot()) {
    const auto* g0 = o->p0.gaussian();
    const auto* g1 = o->p1.gaussian();
    if (!g0 || !g1) return std::nullopt;
    return 0.5 * gaussian_w2sq(g0->mean(), g0->cov(), g1->mean(), g1->cov());
  }
  if (const auto* r = spec.rwpo()) {
    const int d = spec.dim();
    if (const auto* g = r->p0.gaussian(); g && std::holds_alternative<QuadraticPotential>(r->potential)) {
      const double var = 2.0 * (r->horizon + 1.0) / r->beta;
      const Eigen::MatrixXd target = var * Eigen::MatrixXd::Identity(d, d);
      if (g->mean().isZero(0.0) && g->cov().isApprox(target, 1e-14)) return rwpo_quadratic_cost(d, r->beta, r->horizon);
    }
    if (d <= 3) return kernel_optimal_cost(r->p0, r->potential, r->beta, r->horizon, default_quadrature(spec)).value;
  }
  return std::nullopt;
}

double hemicycle_fraction(const FlowModel& m, double t, int n, std::uint64_t seed, double radius, double tol,
                          double x2_max) {
  if (m.dim() != 2) throw ContractError("hemicycle_fraction: d = 2");
  auto rng = make_stream(seed, 0);
  const auto xs = sample(m, t, n, rng);
  int hit = 0;
  for (const auto& x : xs)
    if (std::abs(std::hypot(x[0], x[1]) - radius) <= tol && x[1] < x2_max) ++hit;
  return static_cast<double>(hit) / n;
}

NormalityCheck normality_check(const FlowModel& m, double t, int n, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  const auto xs = sample(m, t, n, rng);
  const int d = m.dim();
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  NormalityCheck out;
  // Under N(0, I): SE(mean_j) = 1/sqrt(n); SE(cov_jj) = sqrt(2/n); SE(cov_jk) = 1/sqrt(n).
  const double rn = std::sqrt(static_cast<double>(n));
  const Eigen::VectorXd mu = X.colwise().mean();
  for (int j = 0; j < d; ++j) out.mean_z.push_back(mu(j) * rn);
  const Eigen::MatrixXd C = X.transpose() * X / n;
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      const double se = (j == k ? std::sqrt(2.0) : 1.0) / rn;
      out.cov_z.push_back((C(j, k) - (j == k ? 1.0 : 0.0)) / se);
    }
  for (double z : out.mean_z) out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
  for (double z : out.cov_z) out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
  return out;
}

json evaluate_experiment(const FlowModel& m, const ExperimentConfig& exp) {
  const auto& spec = exp.problem;
  const double T = spec.horizon();
  json s = json::object();
  const auto rep = objective_eval(m, spec, exp.train, exp.train.n_eval, make_stream(exp.train.seed, 1)());
  s["objective"] = {{"mean", rep.total.mean}, {"se", rep.total.se}};
  s["objective_running"] = {{"mean", rep.running.mean}, {"se", rep.running.se}};
  if (spec.rwpo()) s["objective_terminal"] = {{"mean", rep.terminal.mean}, {"se", rep.terminal.se}};

  const auto bench = objective_benchmark(spec);
  s["benchmark"] = bench ? json(*bench) : json(nullptr);
  s["rel_error"] = bench && *bench != 0.0 ? json(std::abs(rep.total.mean - *bench) / std::abs(*bench)) : json(nullptr);

  if (const auto* o = spec.ot(); o && !o->p0.gaussian() && o->p1.gaussian()) {
    const auto nc = normality_check(m, T, 1000, exp.train.seed + 2);
    s["normality"] = {{"mean_z", nc.mean_z}, {"cov_z", nc.cov_z}, {"max_abs_z", nc.max_abs_z}};
  }
  if (const auto* f = spec.fp()) {
    if (const auto* ou = std::get_if<OUDrift>(&f->drift)) {
      const auto* g = f->p0.gaussian();
      const int d = spec.dim();
      if (g && g->mean().isZero(0.0) && g->cov().isApprox(g->cov()(0, 0) * Eigen::MatrixXd::Identity(d, d), 1e-14)) {
        const double var0 = g->cov()(0, 0);
        const double a = ou->a, gamma = f->gamma;
        if (d == 2) {
          s["rmse"] = rmse_on_grid(
              m, T, [&](std::span<const double> x) { return ou_density(x, T, a, gamma, var0); }, 5.0, 500,
              exp.train.threads);
        }
        auto rng = make_stream(exp.train.seed, 3);
        const auto xs = sample(m, T, 100000, rng);
        double acc = 0.0;
        for (const auto& x : xs)
          for (double v : x) acc += v * v;
        s["second_moment"] = {{"model", acc / static_cast<double>(xs.size())},
                              {"exact", ou_second_moment(T, a, gamma, d * var0, d)}};
      }
    } else if (spec.dim() == 2) {
      s["hemicycle_fraction"] = hemicycle_fraction(m, T, 1000, exp.train.seed + 4);
    }
  }
  return s;
}

}  // namespace vcnf
