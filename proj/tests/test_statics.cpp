#include <cmath>

#include <doctest.h>

#include "oracles.hpp"
#include "wavemap/diagnostics.hpp"
#include "wavemap/statics.hpp"

using namespace wavemap;

TEST_CASE("harmonic map: sphere ground state against 2 arctan r") {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  CHECK(q.ell() == 0.0);
  CHECK(std::abs(q.m() - M_PI) < 1e-12);
  CHECK(q.sign() == 1);
  CHECK(std::abs(eval_Q(q, 1.0) - M_PI / 2.0) < 1e-12);
  CHECK(std::abs(eval_Q(q, 1e6) - M_PI) < 1e-5);
  double err = 0.0, sym = 0.0, ode = 0.0;
  for (int k = 0; k <= 600; ++k) {
    const double r = std::pow(10.0, -3.0 + 6.0 * k / 600.0);
    err = std::max(err, std::abs(q(r) - oracle::q_sphere(r)));
    sym = std::max(sym, std::abs(q(1.0 / r) - (M_PI - q(r))));
    ode = std::max(ode, std::abs(q.r_dQ(r) - std::sin(q(r))));
  }
  CHECK(err < 1e-8);
  CHECK(sym < 1e-8);
  CHECK(ode < 1e-7);
  const double e = 2.0 * (eval_G(S, q.m()) - eval_G(S, q.ell()));
  CHECK(std::abs(q.energy() - 4.0) < 1e-6);
  CHECK(std::abs(e - 4.0) < 1e-10);
}

TEST_CASE("harmonic map: energy density integral matches the closed form") {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  // E(Q) = int (Q_r^2 + sin^2 Q / r^2) r dr = 2 int sin^2(Q) ds with s = log r.
  const double e = oracle::integrate([&](double s) { return 2.0 * std::pow(std::sin(q(std::exp(s))), 2); }, -25.0, 25.0);
  CHECK(std::abs(e - 4.0) < 1e-6);
}

TEST_CASE("harmonic map: downward branch and connectors") {
  const auto S = Metric::sphere();
  const auto v = find_vanishing_set(S);
  const auto down = build_harmonic_map(S, 0.0, -1);
  CHECK(std::abs(down.m() + M_PI) < 1e-12);
  CHECK(std::abs(down(2.0) + oracle::q_sphere(2.0)) < 1e-8);
  const auto c = build_connector(S, v, M_PI, 2.0 * M_PI);
  CHECK(std::abs(c(1.0) - 1.5 * M_PI) < 1e-12);
  CHECK(std::abs(c(3.0) - (M_PI + oracle::q_sphere(3.0))) < 1e-8);
  const auto rev = build_connector(S, v, M_PI, 0.0);
  CHECK(rev.sign() == -1);
  CHECK(std::abs(rev(0.5) - (M_PI - oracle::q_sphere(0.5))) < 1e-8);
  CHECK_THROWS(build_connector(S, v, 0.0, 2.0 * M_PI));
}

TEST_CASE("harmonic map: Yang-Mills connector from -1 to 1") {
  const auto Y = Metric::yang_mills();
  const auto q = build_harmonic_map(Y, -1.0, +1);
  CHECK(std::abs(q.ell() + 1.0) < 1e-12);
  CHECK(std::abs(q.m() - 1.0) < 1e-12);
  const double oracle_e = 2.0 * oracle::integrate([](double x) { return std::abs(1.0 - x * x); }, -1.0, 1.0);
  CHECK(std::abs(q.energy() - oracle_e) < 1e-6);
  CHECK(std::abs(q.energy() - 8.0 / 3.0) < 1e-6);
  // r Q' = 1 - Q^2 is solved by Q = (r^2 - 1)/(r^2 + 1).
  for (double r : {0.01, 0.3, 1.0, 4.0, 90.0}) CHECK(std::abs(q(r) - (r * r - 1.0) / (r * r + 1.0)) < 1e-8);
}

TEST_CASE("rescale_Q: identity, energy and under-resolution warning") {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  const RadialGrid grid(10.0, 1000);
  const auto f = rescale_Q(q, 1.0, grid);
  for (std::size_t i = 1; i <= grid.n(); ++i) CHECK(f.psi[i] == q(grid.r(i)));
  CHECK(f.psi[0] == 0.0);

  // Energy of Q(r/2) on [0, R] is 2 (1 - cos Q(R/2)); the grid error is O(dr^2).
  const double R = 100.0;
  const double exact = 2.0 * (1.0 - std::cos(oracle::q_sphere(R / 2.0)));
  double prev = 0.0;
  for (std::size_t n : {5000u, 10000u, 20000u}) {
    const auto g = rescale_Q(q, 2.0, RadialGrid(R, n));
    const double err = std::abs(total_energy(g, EnergyModel::of(S)) - exact);
    CHECK(err < 1e-3);
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.1));
    prev = err;
  }

  std::vector<std::string> warnings;
  rescale_Q(q, 0.01, RadialGrid::from_spacing(0.02, 100), &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("under-resolved bubble") != std::string::npos);
  warnings.clear();
  rescale_Q(q, 1.0, RadialGrid::from_spacing(0.02, 100), &warnings);
  CHECK(warnings.empty());
}

TEST_CASE("rescale_Q: scaling invariance of the energy (property)") {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  const RadialGrid grid(400.0, 80000);
  for (double lambda : {0.5, 1.0, 2.0, 4.0}) {
    const double R = grid.r_max();
    const double exact = 2.0 * (1.0 - std::cos(oracle::q_sphere(R / lambda)));
    const double e = total_energy(rescale_Q(q, lambda, grid), EnergyModel::of(S));
    CHECK(std::abs(e - exact) < 1e-3);
  }
}
