#pragma once

#include <optional>
#include <string>
#include <vector>

#include "liouvlab/spectral.hpp"

namespace liouvlab {

/// Time bracket [time_lower, time_upper] inside which a trajectory left the
/// admissible region (norm guard crossed, state non-finite, or a singular set
/// approached). `crossing_time` is the first integrator time past the guard.
struct Blowup {
  double time_lower = 0.0;
  double time_upper = 0.0;
  double crossing_time = 0.0;
  std::string reason;

  bool contains(double t) const { return time_lower <= t && t <= time_upper; }
  double width() const { return time_upper - time_lower; }
};

/// Time-sampled solution curve with per-time conserved-quantity log.
template <class State>
struct BasicTrajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<std::string> invariant_names;
  std::vector<std::vector<double>> invariants;  // one row per logged time
  std::optional<Blowup> blowup;

  bool empty() const { return times.empty(); }
  const State& final_state() const { return states.back(); }

  /// Largest relative deviation of invariant `column` from its initial value.
  double max_relative_drift(std::size_t column) const;
};

using Trajectory = BasicTrajectory<Field>;
using OdeTrajectory = BasicTrajectory<std::vector<double>>;

enum class PathMetric { strong_d0, weak_d0star };

/// Compact-open path metric sum_{m>=1} 2^{-m} x_m / (1 + x_m), where x_m is
/// the sup over grid times in [-m, m] of the H^{-s} norm (strong) or the
/// weak-* norm (weak) of the difference. The sum stops at m = ceil(T_max),
/// with at least one term.
double path_distance(const Trajectory& a, const Trajectory& b, PathMetric metric);

template <class State>
double BasicTrajectory<State>::max_relative_drift(std::size_t column) const {
  if (invariants.empty()) return 0.0;
  const double ref = invariants.front().at(column);
  double worst = 0.0;
  for (const auto& row : invariants) {
    const double diff = std::abs(row.at(column) - ref);
    const double rel = ref != 0.0 ? diff / std::abs(ref) : diff;
    if (rel > worst) worst = rel;
  }
  return worst;
}

}  // namespace liouvlab
