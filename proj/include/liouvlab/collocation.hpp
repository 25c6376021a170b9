#pragma once

#include <span>
#include <vector>

#include "liouvlab/spectral.hpp"

namespace liouvlab {

/// Uniform collocation grid with L points per side on T^d, x_j = 2 pi j / L.
///
/// Grid arrays are row-major of length L^d. A "grid spectrum" is the same
/// layout indexed by wavenumber (k mod L). Plans are shared process-wide;
/// transforms are safe to call concurrently on distinct arrays.
class CollocationGrid {
 public:
  CollocationGrid(const SpectralModel& model, int points_per_side);

  int dimension() const { return dimension_; }
  int points_per_side() const { return side_; }
  std::size_t size() const { return total_; }

  /// Signed wavenumber of grid-spectrum slot component j (in (-L/2, L/2]).
  int wavenumber(int j) const { return j <= side_ / 2 ? j : j - side_; }
  Mode slot_mode(std::size_t slot) const;

  /// Physical values u(x_j) = sum_k u_k phi_k(x_j) of a field.
  void to_grid(std::span<const cplx> coeffs, std::span<cplx> grid) const;
  /// L^2-orthonormal coefficients of the retained modes of grid data.
  void from_grid(std::span<cplx> grid, std::span<cplx> coeffs) const;

  /// Unnormalised in-place DFTs (forward: e^{-ikx}, backward: e^{+ikx}).
  void forward(std::span<cplx> data) const;
  void backward(std::span<cplx> data) const;

  /// Quadrature weight (2 pi / L)^d.
  double cell_volume() const { return cell_volume_; }
  /// Factor mapping forward-DFT output to orthonormal coefficients.
  double forward_scale() const { return forward_scale_; }
  /// Factor mapping orthonormal coefficients to backward-DFT input.
  double backward_scale() const { return backward_scale_; }

  std::span<const std::size_t> mode_slots() const { return slots_; }

 private:
  int dimension_;
  int side_;
  std::size_t total_;
  double cell_volume_;
  double forward_scale_;
  double backward_scale_;
  std::vector<std::size_t> slots_;  // grid-spectrum slot of each retained mode
  void* plan_forward_;
  void* plan_backward_;
};

}  // namespace liouvlab
