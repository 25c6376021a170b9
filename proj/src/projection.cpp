#include "liouvlab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "liouvlab/parallel.hpp"
#include "liouvlab/stats.hpp"

namespace liouvlab {

std::vector<double> leading_coordinates(const Field& u, std::size_t n) {
  if (n < 1 || n > 2 * u.size()) throw ModelError("projection rank n outside [1, 2M]");
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    const cplx z = coordinate(u, j / 2);
    y[j] = j % 2 ? z.imag() : z.real();
  }
  return y;
}

std::vector<Coord> leading_coords(std::size_t n) {
  std::vector<Coord> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = {j / 2, j % 2 ? Part::im : Part::re};
  return out;
}

double projected_star_norm(std::span<const double> y) {
  double s = 0.0;
  double weight = 0.5;
  for (std::size_t j = 0; j < y.size(); j += 2) {
    const double im = j + 1 < y.size() ? y[j + 1] : 0.0;
    s += weight * std::hypot(y[j], im);
    weight *= 0.5;
  }
  return s;
}

ProjectionResult nadaraya_watson(const PointCloud& cloud, std::span<const double> values, std::size_t m,
                                 std::span<const double> queries, double bandwidth, bool leave_one_out) {
  if (!(bandwidth > 0.0)) throw ModelError("bandwidth must be > 0");
  const std::size_t dim = cloud.dim;
  const std::size_t count = cloud.size();
  if (values.size() != count * m) throw ModelError("nadaraya_watson: values shape mismatch");
  if (queries.size() % dim) throw ModelError("nadaraya_watson: query shape mismatch");
  const std::size_t nq = queries.size() / dim;
  if (leave_one_out && nq != count) throw ModelError("leave-one-out needs the cloud points as queries");
  ProjectionResult res;
  res.n = dim;
  res.bandwidth = bandwidth;
  res.query_points.assign(queries.begin(), queries.end());
  res.values.assign(nq * m, 0.0);
  res.standard_error.assign(nq * m, 0.0);
  res.ess_per_query.assign(nq, 0.0);
  res.supported.assign(nq, 0);
  const double total = pairwise_sum(cloud.weights);
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  parallel_for(nq, [&](std::size_t q) {
    const double* y = queries.data() + q * dim;
    std::vector<double> kw(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (leave_one_out && i == q) continue;
      const double* x = cloud.coords.data() + i * dim;
      double r2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
      kw[i] = cloud.weights[i] * std::exp(-r2 * inv2h2);
    }
    const double mass = pairwise_sum(kw);
    res.ess_per_query[q] = effective_sample_size(kw);
    if (!(mass >= 1e-6 * total)) return;
    res.supported[q] = 1;
    std::vector<double> column(count);
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t i = 0; i < count; ++i) column[i] = values[i * m + c];
      const auto est = weighted_mean(column, kw);
      res.values[q * m + c] = est.mean;
      res.standard_error[q * m + c] = est.se;
    }
  });
  return res;
}

namespace {

struct ProjectedSnapshot {
  PointCloud cloud;
  std::vector<double> v;       // count x n
  std::vector<double> v_star;  // ||v(t,u_i)||_*
};

ProjectedSnapshot snapshot(const StateFamily& family, const VectorField& v, double t, std::size_t n) {
  const std::size_t count = family.size();
  ProjectedSnapshot s;
  s.cloud.dim = n;
  s.cloud.coords.resize(count * n);
  s.cloud.weights = family.weights;
  s.v.resize(count * n);
  s.v_star.resize(count);
  parallel_for(count, [&](std::size_t i) {
    const Field u = family.state(i, t);
    const Field vu = v(t, u);
    const auto y = leading_coordinates(u, n);
    const auto w = leading_coordinates(vu, n);
    std::copy(y.begin(), y.end(), s.cloud.coords.begin() + static_cast<std::ptrdiff_t>(i * n));
    std::copy(w.begin(), w.end(), s.v.begin() + static_cast<std::ptrdiff_t>(i * n));
    s.v_star[i] = weak_star_norm(vu);
  });
  return s;
}

}  // namespace

ProjectionResult project_vector_field(const StateFamily& family, const VectorField& v, double t, std::size_t n,
                                      std::span<const double> queries, double bandwidth) {
  const auto s = snapshot(family, v, t, n);
  return nadaraya_watson(s.cloud, s.v, n, queries, bandwidth, false);
}

ProjectedResidual projected_liouville_residual(const StateFamily& family, const VectorField& v, std::size_t n,
                                               const CylTestFunction& F, double t, double dt_fd,
                                               const std::vector<double>& bandwidths,
                                               std::span<const double> vhat_drift) {
  if (bandwidths.empty()) throw ModelError("projected residual needs at least one bandwidth");
  if (!vhat_drift.empty() && vhat_drift.size() != n) throw ModelError("drift must have n components");
  // F must only read the first n coordinates
  std::vector<std::size_t> slot(F.arity());
  for (std::size_t j = 0; j < F.arity(); ++j) {
    const auto& c = F.coords()[j];
    slot[j] = 2 * c.mode + (c.part == Part::im ? 1 : 0);
    if (slot[j] >= n) throw ModelError("test function uses coordinates beyond the projection rank");
  }
  const std::size_t count = family.size();
  const auto snap = snapshot(family, v, t, n);

  std::vector<double> lhs(count);
  parallel_for(count, [&](std::size_t i) {
    if (family.advance) {
      const Field u = family.state(i, t);
      lhs[i] = (F.eval(family.advance(u, t, dt_fd)) - F.eval(family.advance(u, t, -dt_fd))) / (2.0 * dt_fd);
    } else {
      lhs[i] = (F.eval(family.state(i, t + dt_fd)) - F.eval(family.state(i, t - dt_fd))) / (2.0 * dt_fd);
    }
  });

  ProjectedResidual out;
  out.bandwidths = bandwidths;
  std::vector<double> contraction;
  for (double h : bandwidths) {
    const auto nw = nadaraya_watson(snap.cloud, snap.v, n, snap.cloud.coords, h, true);
    std::vector<double> rhs(count), w = family.weights;
    std::vector<double> norm_hat(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!nw.supported[i]) {
        w[i] = 0.0;
        continue;
      }
      std::vector<double> vh(nw.values.begin() + static_cast<std::ptrdiff_t>(i * n),
                             nw.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      for (std::size_t a = 0; a < vhat_drift.size(); ++a) vh[a] += vhat_drift[a];
      const auto y = snap.cloud.point(i);
      std::vector<double> yf(F.arity()), g(F.arity());
      for (std::size_t j = 0; j < F.arity(); ++j) yf[j] = y[slot[j]];
      F.phi_gradient(yf, g);
      double s = 0.0;
      for (std::size_t j = 0; j < F.arity(); ++j) s += g[j] * vh[slot[j]];
      rhs[i] = s;
      norm_hat[i] = projected_star_norm(vh);
    }
    const auto ml = weighted_mean(lhs, w);
    const auto mr = weighted_mean(rhs, w);
    std::vector<double> diff(count);
    for (std::size_t i = 0; i < count; ++i) diff[i] = lhs[i] - rhs[i];
    const auto md = weighted_mean(diff, w);
    ResidualRecord r;
    r.estimator = "kernel";
    r.descriptor = F.descriptor();
    r.t = t;
    r.dt_fd = dt_fd;
    r.lhs = ml.mean;
    r.rhs = mr.mean;
    r.residual = md.mean;
    r.se_lhs = ml.se;
    r.se_rhs = mr.se;
    r.se_paired = md.se;
    r.z = r.test_se() > 0.0 ? md.mean / r.test_se() : 0.0;
    double total = 0.0, lost = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      total += family.weights[i];
      if (w[i] == 0.0) lost += family.weights[i];
    }
    r.excluded_mass = lost / total;
    out.records.push_back(r);
    if (contraction.empty()) {
      contraction = norm_hat;
      out.contraction_lhs = weighted_mean(norm_hat, w).mean;
      const auto star = weighted_mean(snap.v_star, w);
      out.contraction_rhs = star.mean;
      std::vector<double> gap(count);
      for (std::size_t i = 0; i < count; ++i) gap[i] = snap.v_star[i] - norm_hat[i];
      out.contraction_se = weighted_mean(gap, w).se;
    }
  }
  // least squares r(h) = r0 + c h^2; SE(r0) <= sum |a_k| se_k (fully correlated)
  const std::size_t K = bandwidths.size();
  if (K == 1) {
    out.extrapolated_residual = out.records[0].residual;
    out.extrapolated_se = out.records[0].test_se();
  } else {
    double sx = 0, sxx = 0;
    for (double h : bandwidths) {
      sx += h * h;
      sxx += h * h * h * h;
    }
    const double det = K * sxx - sx * sx;
    for (std::size_t k = 0; k < K; ++k) {
      const double x = bandwidths[k] * bandwidths[k];
      const double a = (sxx - sx * x) / det;
      out.extrapolated_residual += a * out.records[k].residual;
      out.extrapolated_se += std::abs(a) * out.records[k].test_se();
    }
  }
  out.z = out.extrapolated_se > 0.0 ? out.extrapolated_residual / out.extrapolated_se : 0.0;
  return out;
}

namespace {

double gaussian_kernel(double r2, double eps, std::size_t dim) {
  return std::exp(-r2 / (2.0 * eps * eps)) * std::pow(2.0 * std::numbers::pi * eps * eps, -0.5 * dim);
}

}  // namespace

MollifyResult mollify(const PointCloud& e, const PointField& v, double eps, std::span<const double> queries) {
  if (!(eps > 0.0)) throw ModelError("mollifier width eps must be > 0");
  const std::size_t dim = e.dim, count = e.size();
  if (queries.size() % dim) throw ModelError("mollify: query shape mismatch");
  std::vector<double> vals(count * dim);
  for (std::size_t i = 0; i < count; ++i) v(e.point(i), std::span<double>(vals.data() + i * dim, dim));
  const double total = pairwise_sum(e.weights);
  const std::size_t nq = queries.size() / dim;
  MollifyResult res;
  res.density.assign(nq, 0.0);
  res.field.assign(nq * dim, 0.0);
  parallel_for(nq, [&](std::size_t q) {
    const double* y = queries.data() + q * dim;
    std::vector<double> kw(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto x = e.point(i);
      double r2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
      kw[i] = e.weights[i] * gaussian_kernel(r2, eps, dim);
    }
    const double mass = pairwise_sum(kw);
    res.density[q] = mass / total;
    std::vector<double> col(count);
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t i = 0; i < count; ++i) col[i] = kw[i] * vals[i * dim + a];
      res.field[q * dim + a] = mass > 0.0 ? pairwise_sum(col) / mass : 0.0;
    }
  });
  return res;
}

BoundCheck check_mollify_bound(const PointCloud& e, const PointField& v, double eps, double spacing,
                               const std::function<double(double)>& theta) {
  if (!(eps > 0.0)) throw ModelError("mollifier width eps must be > 0");
  if (!(spacing > 0.0) || spacing > eps / 4.0 * (1.0 + 1e-12)) {
    throw ModelError("grid too coarse: spacing must be <= eps/4");
  }
  const std::size_t dim = e.dim, count = e.size();
  if (dim < 1 || dim > 4) throw ModelError("mollification bound check supports 1 <= dim <= 4");
  auto transform = theta ? theta : [](double x) { return x; };
  std::vector<double> lo(dim, INFINITY), hi(dim, -INFINITY);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], e.point(i)[a]);
      hi[a] = std::max(hi[a], e.point(i)[a]);
    }
  }
  std::vector<std::size_t> shape(dim);
  std::size_t cells = 1;
  for (std::size_t a = 0; a < dim; ++a) {
    lo[a] -= 6.0 * eps;
    hi[a] += 6.0 * eps;
    shape[a] = static_cast<std::size_t>(std::ceil((hi[a] - lo[a]) / spacing)) + 1;
    cells *= shape[a];
  }
  std::vector<double> vals(count * dim);
  std::vector<double> rhs_terms(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::span<double> out(vals.data() + i * dim, dim);
    v(e.point(i), out);
    double n2 = 0.0;
    for (double x : out) n2 += x * x;
    rhs_terms[i] = transform(std::sqrt(n2));
  }
  const double total = pairwise_sum(e.weights);
  const double cell_volume = std::pow(spacing, static_cast<double>(dim));
  const double cutoff2 = 64.0 * eps * eps;
  std::vector<double> lhs_terms(cells), mass_terms(cells);
  parallel_for(cells, [&](std::size_t c) {
    std::vector<double> y(dim);
    std::size_t rem = c;
    for (std::size_t a = dim; a-- > 0;) {
      y[a] = lo[a] + spacing * static_cast<double>(rem % shape[a]);
      rem /= shape[a];
    }
    double mass = 0.0;
    std::vector<double> flux(dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      const auto x = e.point(i);
      double r2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
      if (r2 > cutoff2) continue;
      const double k = e.weights[i] * gaussian_kernel(r2, eps, dim);
      mass += k;
      for (std::size_t a = 0; a < dim; ++a) flux[a] += k * vals[i * dim + a];
    }
    mass /= total;
    double n2 = 0.0;
    for (double f : flux) n2 += f * f;
    const double speed = mass > 0.0 ? std::sqrt(n2) / total / mass : 0.0;
    lhs_terms[c] = transform(speed) * mass * cell_volume;
    mass_terms[c] = mass * cell_volume;
  });
  BoundCheck res;
  res.lhs = pairwise_sum(lhs_terms);
  res.grid_mass = pairwise_sum(mass_terms);
  res.rhs = weighted_mean(rhs_terms, e.weights).mean;
  res.slack = res.rhs - res.lhs;
  res.grid_ok = std::abs(res.grid_mass - 1.0) <= 1e-3;
  res.holds = res.grid_ok && res.slack >= -res.tolerance;
  return res;
}

}  // namespace liouvlab
