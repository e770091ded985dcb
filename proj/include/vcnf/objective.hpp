#pragma once

// Penalty-free objective estimate used for reporting.
//
// OT:   int_0^1 E |v|^2 / 2 dt
// RWPO: int_0^T E |v + s / beta|^2 / 2 dt + E V(f(z, T))
// FP:   int_0^T E |v - b + gamma s|^2 dt / T   (flow-matching residual)
//
// Time is stratified into eval_time_points equal cells with one uniform time
// per cell; every cell draws from its own RNG stream.

#include <random>

#include "vcnf/flow.hpp"
#include "vcnf/problems.hpp"
#include "vcnf/train_config.hpp"

namespace vcnf {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct ObjectiveReport {
  Estimate total;
  Estimate running;
  Estimate terminal;
};

ObjectiveReport objective_eval(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, int n_eval,
                               std::uint64_t seed);

/// Draws the stream seed from rng.
ObjectiveReport objective_eval(const FlowModel& m, const ProblemSpec& spec, const TrainConfig& cfg, int n_eval,
                               std::mt19937_64& rng);

}  // namespace vcnf
