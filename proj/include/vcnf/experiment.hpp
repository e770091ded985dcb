#pragma once

// Experiment recipes: TOML (or resolved JSON) in, typed problem/model/train
// settings out, plus the post-training evaluation shared by the CLI and the
// acceptance runner.
//
//   name = "ot-case1"
//   [problem]               kind = "ot" | "rwpo" | "fp", plus kind-specific keys
//   [problem.p0]            type = "gaussian" | "isotropic" | "ring"
//   [model]                 layers, hidden, bins, bound, ...
//   [train]                 TrainConfig fields
//   [output]                dir
//
// Unknown keys anywhere are a ConfigError.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcnf/conditioner.hpp"
#include "vcnf/flow.hpp"
#include "vcnf/oracles.hpp"
#include "vcnf/problems.hpp"
#include "vcnf/train_config.hpp"

namespace vcnf {

struct ExperimentConfig {
  std::string name;
  ProblemSpec problem;
  Architecture arch;
  TrainConfig train;
  std::filesystem::path out_dir;
  /// Every setting with defaults filled in; loading it back yields the same experiment.
  nlohmann::json resolved;
};

/// Parses a TOML file (or a .json file holding a resolved config), applying
/// "dotted.key=value" overrides first. Throws ConfigError.
ExperimentConfig load_experiment(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Same, from an already-parsed tree.
ExperimentConfig experiment_from_json(nlohmann::json tree, const std::vector<std::string>& overrides = {});

nlohmann::json toml_to_json(const std::string& toml_text, const std::string& source = "<string>");

/// 64-bit FNV-1a of the compact resolved JSON, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

// ---- Evaluation ----

/// Reference value for the penalty-free objective when one exists:
/// OT between Gaussians, RWPO with a Gaussian start in d <= 3.
std::optional<double> objective_benchmark(const ProblemSpec& spec);

QuadratureSpec default_quadrature(const ProblemSpec& spec);

/// Fraction of n samples of f(., T) within tol of the circle |x| = radius with x2 < x2_max.
double hemicycle_fraction(const FlowModel& m, double t, int n, std::uint64_t seed, double radius = 2.0,
                          double tol = 0.5, double x2_max = 1.0);

struct NormalityCheck {
  std::vector<double> mean_z;  // per coordinate, mean / SE
  std::vector<double> cov_z;   // per upper-triangular entry, (cov - I) / SE
  double max_abs_z = 0.0;
};

/// Compares sample mean and covariance of f(., t) against N(0, I).
NormalityCheck normality_check(const FlowModel& m, double t, int n, std::uint64_t seed);

/// Summary: objective, benchmark, relative error, problem-specific metrics.
nlohmann::json evaluate_experiment(const FlowModel& m, const ExperimentConfig& exp);

}  // namespace vcnf
