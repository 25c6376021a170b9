#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "liouvlab/measures.hpp"

using namespace liouvlab;

namespace {

Field random_field(const ModelPtr& m, unsigned seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, scale);
  Field u(m);
  for (auto& c : u.coeffs) c = {n(gen), n(gen)};
  return u;
}

// symmetric difference quotient of h along v
double directional_fd(const NonlinearFunctional& h, const Field& u, const Field& v, double eps) {
  return (h.energy(u + cplx(eps) * v) - h.energy(u - cplx(eps) * v)) / (2.0 * eps);
}

}  // namespace

TEST_CASE("gaussian second moments match 2 / lambda_k") {
  auto m = build_model(1, 6, 0.0, OperatorKind::laplacian_plus_one);
  const std::size_t n = 40000;
  const auto e = sample_gaussian(m, n, 11);
  CHECK_NOTHROW(e.validate());
  CHECK(e.size() == n);
  for (double w : e.weights) CHECK(w == 1.0);
  for (std::size_t k = 0; k < m->size(); ++k) {
    double second = 0.0, re_im = 0.0;
    for (const auto& u : e.samples) {
      second += std::norm(u.coeffs[k]);
      re_im += u.coeffs[k].real() * u.coeffs[k].imag();
    }
    second /= n;
    const double want = 2.0 / m->eigenvalue(k);
    CAPTURE(k);
    // |u_k|^2 is exponential with mean 2/lambda: sd = mean
    CHECK(std::abs(second - want) < 4.0 * want / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(re_im / n) < 4.0 / m->eigenvalue(k) / std::sqrt(static_cast<double>(n)));
  }
  const auto idx = *m->index_of({3, 0});
  CHECK(m->eigenvalue(idx) == 10.0);
  double second = 0.0;
  for (const auto& u : e.samples) second += std::norm(u.coeffs[idx]);
  CHECK(second / n == doctest::Approx(0.2).epsilon(0.03));
}

TEST_CASE("sampling is reproducible from the seed") {
  auto m = build_model(2, 3, 0.5, OperatorKind::laplacian_plus_one);
  const auto a = sample_gaussian(m, 50, 5), b = sample_gaussian(m, 50, 5), c = sample_gaussian(m, 50, 6);
  CHECK(a.samples[17].coeffs == b.samples[17].coeffs);
  CHECK(a.samples[17].coeffs != c.samples[17].coeffs);
  const auto head = a.head(10);
  CHECK(head.size() == 10);
  CHECK(head.samples[9].coeffs == a.samples[9].coeffs);
}

TEST_CASE("enstrophy measure is real with E|u_k|^2 = 1/|k|^2") {
  auto m = build_model(2, 3, 0.0, OperatorKind::laplacian_mean_zero);
  const std::size_t n = 20000;
  const auto e = sample_enstrophy_gaussian(m, n, 3);
  for (std::size_t s = 0; s < 20; ++s) {
    for (std::size_t k = 0; k < m->size(); ++k) {
      const auto& mode = m->mode(k);
      const auto j = *m->index_of({-mode[0], -mode[1]});
      CHECK(std::abs(e.samples[s].coeffs[j] - std::conj(e.samples[s].coeffs[k])) < 1e-15);
    }
  }
  for (std::size_t k = 0; k < m->size(); ++k) {
    double second = 0.0;
    for (const auto& u : e.samples) second += std::norm(u.coeffs[k]);
    second /= n;
    const double want = 1.0 / m->norm2(k);
    CAPTURE(k);
    CHECK(std::abs(second - want) < 4.0 * want / std::sqrt(static_cast<double>(n)));
  }
  CHECK_THROWS_AS(sample_enstrophy_gaussian(build_model(2, 3, 0.5, OperatorKind::laplacian_plus_one), 10, 1),
                  ModelError);
}

TEST_CASE("characteristic functional of the gaussian measure") {
  auto m = build_model(1, 4, 0.3, OperatorKind::laplacian_plus_one);
  const auto e = sample_gaussian(m, 40000, 21);
  Field xi(m);
  xi.coeffs[0] = {0.7, 0.2};
  xi.coeffs[2] = {-0.4, 1.1};
  xi.coeffs[5] = {0.9, 0.0};
  // pairing is Re sum lambda^{-s} u_k conj(xi_k), gaussian with variance sum lambda^{-2s-1} |xi_k|^2
  double variance = 0.0;
  for (std::size_t k = 0; k < m->size(); ++k) {
    variance += std::pow(m->eigenvalue(k), -2.0 * m->sobolev_s() - 1.0) * std::norm(xi.coeffs[k]);
  }
  const auto cf = characteristic_functional(e, xi);
  CHECK(std::abs(cf.value.real() - std::exp(-0.5 * variance)) < 4.0 * cf.se + 1e-3);
  CHECK(std::abs(cf.value.imag()) < 4.0 * cf.se + 1e-3);
  CHECK(std::abs(characteristic_functional(e, Field(m)).value - cplx(1.0)) < 1e-15);
}

TEST_CASE("wick variance sums the gaussian two-point function") {
  for (int N : {2, 5, 9}) {
    auto m = build_model(1, N, 0.0, OperatorKind::laplacian_plus_one);
    double sum = 0.0;
    for (int k = -N; k <= N; ++k) sum += 2.0 / (1.0 + k * k);
    CHECK(wick_variance(*m) == doctest::Approx(sum / (2.0 * std::numbers::pi)).epsilon(1e-14));
  }
  auto m2 = build_model(2, 3, 0.5, OperatorKind::laplacian_plus_one);
  double sum2 = 0.0;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) sum2 += 2.0 / (1.0 + a * a + b * b);
  CHECK(wick_variance(*m2) == doctest::Approx(sum2 / (4.0 * std::numbers::pi * std::numbers::pi)).epsilon(1e-14));
  CHECK_THROWS_AS(wick_variance(*build_model(2, 3, 0.0, OperatorKind::laplacian_mean_zero)), ModelError);
}

TEST_CASE("wick powers are Hermite-Laguerre polynomials") {
  const double s2 = 0.7;
  for (double x : {0.0, 0.3, 1.9}) {
    CHECK(wick_power(1, x, s2).first == doctest::Approx(x - s2).epsilon(1e-14));
    CHECK(wick_power(2, x, s2).first == doctest::Approx(x * x - 4.0 * x * s2 + 2.0 * s2 * s2).epsilon(1e-13));
    CHECK(wick_power(2, x, s2).second == doctest::Approx(2.0 * x - 4.0 * s2).epsilon(1e-13));
    const double h = 1e-5;
    for (int r : {3, 4}) {
      const double fd = (wick_power(r, x + h, s2).first - wick_power(r, x - h, s2).first) / (2.0 * h);
      CHECK(wick_power(r, x, s2).second == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("nls energy of a constant field") {
  auto m = build_model(1, 4, 0.0, OperatorKind::laplacian_plus_one);
  const NonlinearFunctional h(m, make_nonlinearity(*m, NonlinearityKind::nls_power, 2));
  for (double a : {0.5, 1.0, 2.3}) {
    const auto u = basis_field(m, 0, a);
    CHECK(h.energy(u) == doctest::Approx(std::pow(a, 4) / (8.0 * std::numbers::pi)).epsilon(1e-13));
  }
  CHECK(h.energy(Field(m)) == 0.0);
}

TEST_CASE("hartree energy of a single mode") {
  // |u|^2 = a^2 / (2 pi) is constant, so only the zero mode of V enters
  auto m = build_model(1, 3, 0.0, OperatorKind::laplacian_plus_one);
  const NonlinearFunctional h(m, make_nonlinearity(*m, NonlinearityKind::hartree));
  const double a = 1.3;
  const auto u = basis_field(m, 2, a);
  const double rho0 = a * a / (2.0 * std::numbers::pi) * std::sqrt(2.0 * std::numbers::pi);
  CHECK(h.energy(u) == doctest::Approx(0.25 * rho0 * rho0).epsilon(1e-13));
  for (unsigned seed = 0; seed < 20; ++seed) CHECK(h.energy(random_field(m, seed)) >= 0.0);
}

TEST_CASE("gradients match second-order difference quotients for every kind") {
  for (int d : {1, 2}) {
    const double s = d == 1 ? 0.0 : 0.5;
    auto m = build_model(d, 3, s, OperatorKind::laplacian_plus_one);
    for (auto kind : {NonlinearityKind::hartree, NonlinearityKind::hartree_wick, NonlinearityKind::nls_power,
                      NonlinearityKind::nls_wick}) {
      for (int r : {2, 3}) {
        const NonlinearFunctional h(m, make_nonlinearity(*m, kind, r));
        const auto u = random_field(m, 7 * d + r, 0.4);
        const auto v = random_field(m, 100 + r, 0.4);
        const double exact = real_pairing(h.gradient(u), v);
        const double e1 = std::abs(directional_fd(h, u, v, 1e-2) - exact);
        const double e2 = std::abs(directional_fd(h, u, v, 5e-3) - exact);
        CAPTURE(d);
        CAPTURE(to_string(kind));
        CAPTURE(r);
        CHECK(std::abs(directional_fd(h, u, v, 1e-4) - exact) < 1e-6 * (1.0 + std::abs(exact)));
        if (e1 > 1e-10) CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
      }
    }
  }
}

TEST_CASE("energies are gauge and translation invariant") {
  auto m = build_model(1, 5, 0.0, OperatorKind::laplacian_plus_one);
  for (auto kind : {NonlinearityKind::hartree, NonlinearityKind::nls_power, NonlinearityKind::nls_wick}) {
    const NonlinearFunctional h(m, make_nonlinearity(*m, kind, 2));
    const auto u = random_field(m, 9, 0.5);
    const auto rotated = std::polar(1.0, 0.83) * u;
    CHECK(h.energy(rotated) == doctest::Approx(h.energy(u)).epsilon(1e-12));
    Field moved = u;
    for (std::size_t k = 0; k < u.size(); ++k) moved.coeffs[k] *= std::polar(1.0, 0.7 * m->mode(k)[0]);
    CHECK(h.energy(moved) == doctest::Approx(h.energy(u)).epsilon(1e-12));
  }
}

TEST_CASE("gibbs reweighting") {
  auto m = build_model(1, 6, 0.0, OperatorKind::laplacian_plus_one);
  const auto base = sample_gaussian(m, 2000, 4);
  const NonlinearFunctional none(m, make_nonlinearity(*m, NonlinearityKind::none));
  const auto flat = gibbs_reweight(base, none);
  for (double w : flat.ensemble.weights) CHECK(w == 1.0);
  CHECK(flat.diagnostics.ess_fraction == doctest::Approx(1.0));

  const NonlinearFunctional nls(m, make_nonlinearity(*m, NonlinearityKind::nls_power, 2));
  const auto g = gibbs_reweight(base, nls);
  double largest = 0.0;
  for (std::size_t i = 0; i < g.ensemble.size(); ++i) {
    const double w = g.ensemble.weights[i];
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
    largest = std::max(largest, w);
    CHECK(g.energies[i] == doctest::Approx(nls.energy(base.samples[i])));
  }
  CHECK(largest == 1.0);
  CHECK(g.diagnostics.ess > 1.0);
  CHECK(g.diagnostics.ess <= 2000.0);
  CHECK_FALSE(g.diagnostics.unreliable);

  // phase symmetry: weights are unchanged by a global phase
  Ensemble rotated = base;
  for (auto& u : rotated.samples) u = std::polar(1.0, 1.1) * u;
  const auto gr = gibbs_reweight(rotated, nls);
  for (std::size_t i = 0; i < 50; ++i) CHECK(gr.ensemble.weights[i] == doctest::Approx(g.ensemble.weights[i]).epsilon(1e-12));
}

TEST_CASE("displaced measures shift every sample") {
  auto m = build_model(1, 3, 0.0, OperatorKind::laplacian_plus_one);
  const auto e = sample_gaussian(m, 10, 1);
  const auto shift = basis_field(m, 1, 2.0);
  const auto moved = displaced(e, shift);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(moved.samples[i].coeffs[1] == e.samples[i].coeffs[1] + cplx(2.0));
    CHECK(moved.weights[i] == e.weights[i]);
  }
}

TEST_CASE("nonlinearity validation") {
  auto mz = build_model(1, 3, 0.0, OperatorKind::laplacian_mean_zero);
  CHECK_THROWS_AS(make_nonlinearity(*mz, NonlinearityKind::nls_wick, 2), ModelError);
  auto m = build_model(1, 3, 0.0, OperatorKind::laplacian_plus_one);
  CHECK_THROWS_AS(make_nonlinearity(*m, NonlinearityKind::nls_power, 0), ModelError);
  CHECK(nonlinearity_from_string("hartree_wick") == NonlinearityKind::hartree_wick);
  CHECK_THROWS(nonlinearity_from_string("cubic"));
  CHECK(potential_hat(make_nonlinearity(*m, NonlinearityKind::hartree), {2, 0}) == doctest::Approx(std::exp(-4.0)));
}
