#pragma once

#include <cstdint>

#include "vcnf/errors.hpp"

namespace vcnf {

struct TrainConfig {
  int steps = 30000;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double lambda = 500.0;
  int n_t = 20;   // time points per iteration
  int n_k = 64;   // latents per time point
  int n_b = 2048; // boundary samples per constrained endpoint
  int n_1 = 64;   // terminal-cost samples

  double dt_fraction = 1e-3;  // velocity step = dt_fraction * T
  double dx = 1e-3;           // score step

  std::uint64_t seed = 0;
  int eval_every = 500;
  int checkpoint_every = 5000;
  double clip_norm = 100.0;

  int n_eval = 100000;
  int eval_time_points = 100;

  /// Boundary samples per parallel work item.
  int penalty_chunk = 128;
  /// Worker cap; 0 means the OpenMP default.
  int threads = 0;

  double dt(double horizon) const noexcept { return dt_fraction * horizon; }

  void validate() const {
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("train: Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("train: lambda must be non-negative");
    if (n_t < 1 || n_k < 1 || n_b < 1 || n_1 < 1) throw ConfigError("train: batch sizes must be >= 1");
    if (!(dt_fraction > 0.0) || !(dx > 0.0)) throw ConfigError("train: finite-difference steps must be positive");
    if (eval_every < 1 || checkpoint_every < 1) throw ConfigError("train: logging intervals must be >= 1");
    if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
    if (n_eval < 1000) throw ConfigError("train: n_eval must be >= 1000");
    if (eval_time_points < 1) throw ConfigError("train: eval_time_points must be >= 1");
    if (penalty_chunk < 1) throw ConfigError("train: penalty_chunk must be >= 1");
    if (threads < 0) throw ConfigError("train: threads must be >= 0");
  }
};

}  // namespace vcnf
