#include "liouvlab/collocation.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace liouvlab {

namespace {

std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

fftw_plan shared_plan(int dimension, int side, int sign) {
  std::lock_guard lock(g_plan_mutex);
  const auto key = std::make_tuple(dimension, side, sign);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;
  const std::size_t total = dimension == 2 ? static_cast<std::size_t>(side) * side : side;
  fftw_complex* scratch = fftw_alloc_complex(total);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fftw_plan plan = dimension == 2 ? fftw_plan_dft_2d(side, side, scratch, scratch, sign, flags)
                                  : fftw_plan_dft_1d(side, scratch, scratch, sign, flags);
  fftw_free(scratch);
  if (!plan) throw ModelError("FFTW plan creation failed");
  g_plans.emplace(key, plan);
  return plan;
}

}  // namespace

CollocationGrid::CollocationGrid(const SpectralModel& model, int points_per_side)
    : dimension_(model.dimension()), side_(points_per_side) {
  if (points_per_side < 2 * model.cutoff() + 1) {
    throw ModelError("collocation grid too coarse for the retained modes");
  }
  total_ = dimension_ == 2 ? static_cast<std::size_t>(side_) * side_ : side_;
  const double two_pi = 2.0 * std::numbers::pi;
  cell_volume_ = std::pow(two_pi / side_, dimension_);
  forward_scale_ = std::pow(two_pi, dimension_ / 2.0) / static_cast<double>(total_);
  backward_scale_ = std::pow(two_pi, -dimension_ / 2.0);
  slots_.reserve(model.size());
  for (const auto& k : model.modes()) {
    std::size_t slot = static_cast<std::size_t>((k[0] % side_ + side_) % side_);
    if (dimension_ == 2) slot = slot * side_ + static_cast<std::size_t>((k[1] % side_ + side_) % side_);
    slots_.push_back(slot);
  }
  plan_forward_ = shared_plan(dimension_, side_, FFTW_FORWARD);
  plan_backward_ = shared_plan(dimension_, side_, FFTW_BACKWARD);
}

Mode CollocationGrid::slot_mode(std::size_t slot) const {
  if (dimension_ == 1) return {wavenumber(static_cast<int>(slot)), 0};
  return {wavenumber(static_cast<int>(slot / side_)), wavenumber(static_cast<int>(slot % side_))};
}

void CollocationGrid::forward(std::span<cplx> data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_forward_), p, p);
}

void CollocationGrid::backward(std::span<cplx> data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_backward_), p, p);
}

void CollocationGrid::to_grid(std::span<const cplx> coeffs, std::span<cplx> grid) const {
  std::fill(grid.begin(), grid.end(), cplx{});
  for (std::size_t i = 0; i < slots_.size(); ++i) grid[slots_[i]] = coeffs[i] * backward_scale_;
  backward(grid);
}

void CollocationGrid::from_grid(std::span<cplx> grid, std::span<cplx> coeffs) const {
  forward(grid);
  for (std::size_t i = 0; i < slots_.size(); ++i) coeffs[i] = grid[slots_[i]] * forward_scale_;
}

}  // namespace liouvlab
