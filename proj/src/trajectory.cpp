#include "liouvlab/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace liouvlab {

double path_distance(const Trajectory& a, const Trajectory& b, PathMetric metric) {
  if (a.times != b.times) throw ModelError("path_distance: time grids differ");
  if (a.states.size() != a.times.size() || b.states.size() != b.times.size()) {
    throw ModelError("path_distance: trajectory has missing states");
  }
  if (a.times.empty()) return 0.0;

  double t_max = 0.0;
  for (double t : a.times) t_max = std::max(t_max, std::abs(t));
  const int terms = std::max(1, static_cast<int>(std::ceil(t_max)));

  std::vector<double> pointwise(a.times.size());
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const Field diff = a.states[i] - b.states[i];
    pointwise[i] = metric == PathMetric::strong_d0
                       ? sobolev_norm(diff, -diff.model->sobolev_s())
                       : weak_star_norm(diff);
  }

  double total = 0.0;
  double weight = 0.5;
  for (int m = 1; m <= terms; ++m) {
    double sup = 0.0;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
      if (std::abs(a.times[i]) <= m) sup = std::max(sup, pointwise[i]);
    }
    total += weight * sup / (1.0 + sup);
    weight *= 0.5;
  }
  return total;
}

}  // namespace liouvlab
