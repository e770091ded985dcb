#pragma once

// Optimization loop: sample a batch, evaluate loss and gradient, Adam update.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcnf/flow.hpp"
#include "vcnf/objective.hpp"
#include "vcnf/problems.hpp"
#include "vcnf/train_config.hpp"

namespace vcnf {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// Bias-corrected Adam. Moments are sized on first use.
void adam_step(std::vector<double>& params, std::span<const double> grad, AdamState& state,
               const TrainConfig& cfg);

/// Scales grad in place so its Euclidean norm is at most max_norm; returns the norm before scaling.
double clip_global_norm(std::span<double> grad, double max_norm);

struct MetricRow {
  int iteration = 0;
  double total = 0.0;
  double kinetic = 0.0;
  double penalty = 0.0;
  double terminal = 0.0;
  double grad_norm = 0.0;
  double wall_seconds = 0.0;
};

struct RunMetrics {
  std::vector<MetricRow> rows;
  std::vector<double> loss_history;  // total loss at every iteration
  std::optional<ObjectiveReport> objective;
  std::optional<double> benchmark;
  std::optional<double> rel_error;
};

struct TrainOptions {
  Architecture arch;  // dim and horizon are taken from the problem
  /// Empty: no files. Otherwise metrics.csv, checkpoints/ and model.{json,bin}.
  std::filesystem::path out_dir;
  std::optional<double> benchmark;
  bool evaluate = true;
  std::function<void(const MetricRow&)> on_log;
};

/// Non-finite loss or gradient. Carries the last checkpoint written, if any.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::string last_checkpoint)
      : NumericError(what), last_checkpoint_(std::move(last_checkpoint)) {}
  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

struct TrainResult {
  FlowModel model;
  RunMetrics metrics;
};

TrainResult train(const ProblemSpec& spec, const TrainConfig& cfg, const TrainOptions& opts);

inline constexpr const char* kMetricsHeader =
    "iteration,total,kinetic,penalty,terminal,grad_norm,wall_seconds";

}  // namespace vcnf
