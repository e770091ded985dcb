#include "vcnf/finite_diff.hpp"

namespace vcnf {

std::vector<double> velocity_fd(const FlowModel& m, std::span<const double> z, double t, double dt) {
  if (!(dt > 0.0)) throw ContractError("velocity_fd: step must be positive");
  const FlowAt<double> plus(m, t + 0.5 * dt);
  const FlowAt<double> minus(m, t - 0.5 * dt);
  return velocity_fd<double>(plus, minus, z, dt);
}

std::vector<double> score_fd(const FlowModel& m, std::span<const double> x, double t, double dx) {
  if (!(dx > 0.0)) throw ContractError("score_fd: step must be positive");
  return score_fd<double>(FlowAt<double>(m, t), x, dx);
}

}  // namespace vcnf
