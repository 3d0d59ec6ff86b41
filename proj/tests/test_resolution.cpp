#include <cmath>
#include <limits>

#include <doctest.h>

#include "oracles.hpp"
#include "wavemap/data.hpp"
#include "wavemap/error.hpp"
#include "wavemap/resolution.hpp"

using namespace wavemap;

namespace {
struct Setup {
  Metric S = Metric::sphere();
  VanishingSet v = find_vanishing_set(S);
  HarmonicMap up(double ell, double m) const { return build_connector(S, v, ell, m); }
};
}  // namespace

TEST_CASE("compute_delta0: sphere, Yang-Mills, single root") {
  const auto S = Metric::sphere();
  const auto t = compute_delta0(S, 4.0);
  CHECK(t.delta0 == doctest::Approx(0.5).epsilon(1e-12));
  for (double eta : t.eta) CHECK(eta == doctest::Approx(1.0).epsilon(1e-10));
  // |sin(2 atan x)| = 1/4 at x = 4 - sqrt(15), so eps0 = x^2.
  const double x = oracle::bisect([](double s) { return std::sin(2.0 * std::atan(s)) - 0.25; }, 1e-6, 1.0);
  CHECK(t.eps0 == doctest::Approx(x * x).epsilon(1e-6));
  CHECK(t.eps0 == doctest::Approx(std::pow(4.0 - std::sqrt(15.0), 2)).epsilon(1e-6));

  const auto Y = Metric::yang_mills();
  const auto y = compute_delta0(Y, 2.0);
  // sup of |1 - x^2| on [-1, 1] by maximization on a dense grid.
  double sup = 0.0;
  for (int k = 0; k <= 20000; ++k) sup = std::max(sup, std::abs(1.0 - std::pow(-1.0 + k * 1e-4, 2)));
  CHECK(y.delta0 == doctest::Approx(0.5 * sup).epsilon(1e-9));

  CHECK_THROWS_AS(compute_delta0(Metric::custom("x", "1", {-1.0, 1.0}), 1.0), PreconditionError);
}

TEST_CASE("extract_bubbles: constant field") {
  const auto S = Metric::sphere();
  const RadialGrid g(4.0, 1024);
  const auto rep = extract_bubbles(RadialField::constant(g, M_PI), S, 2.0);
  CHECK(rep.J == 0);
  CHECK(rep.errors.empty());
  CHECK(rep.ell == doctest::Approx(M_PI));
  for (double v : rep.residual.psi) CHECK(v == M_PI);
}

TEST_CASE("extract_bubbles: planted single bubble") {
  Setup s;
  const auto q = s.up(0.0, M_PI);
  const RadialGrid g(4.0, 6400);
  const auto f = planted_bubbles(g, M_PI, {{q, 1e-2}});
  const auto rep = extract_bubbles(f, s.S, 1.0);
  REQUIRE(rep.J == 1);
  CHECK(rep.bubbles[0].lambda == doctest::Approx(1e-2).epsilon(0.05));
  CHECK(rep.bubbles[0].map.ell() == 0.0);
  CHECK(rep.bubbles[0].map.m() == rep.ell);
  const auto hn = h_norms(rep.residual, rep.ell, 1.0);
  CHECK(hn.HxL2() < 0.01 * q.energy());
  CHECK(rep.ledger.defect_fraction < 0.02);
  const auto again = extract_bubbles(rep.residual, s.S, 1.0);
  CHECK(again.J == 0);
}

TEST_CASE("extract_bubbles: planted tower with chained endpoints") {
  Setup s;
  const RadialGrid g(4.0, 640000);
  const auto f = planted_bubbles(g, 2.0 * M_PI, {{s.up(M_PI, 2.0 * M_PI), 1e-1}, {s.up(0.0, M_PI), 1e-4}});
  const auto rep = extract_bubbles(f, s.S, 1.0);
  REQUIRE(rep.J == 2);
  CHECK(rep.bubbles[0].lambda == doctest::Approx(1e-1).epsilon(0.05));
  CHECK(rep.bubbles[1].lambda == doctest::Approx(1e-4).epsilon(0.05));
  CHECK(rep.bubbles[1].map.m() == rep.bubbles[0].map.ell());
  CHECK(rep.ledger.defect_fraction < 0.02);
  const auto scales = rep.scales();
  CHECK(scales.size() == 2);
}

TEST_CASE("extract_bubbles: under-resolved and unresolved structures are reported") {
  Setup s;
  const RadialGrid g(4.0, 400);
  const auto f = planted_bubbles(g, M_PI, {{s.up(0.0, M_PI), 1e-2}});
  const auto rep = extract_bubbles(f, s.S, 1.0);
  CHECK(rep.J == 0);
  REQUIRE_FALSE(rep.errors.empty());
  CHECK(rep.errors[0].find("under-resolved scale") != std::string::npos);

  // Two bubbles at comparable scales violate the separation floor.
  const RadialGrid h(4.0, 20000);
  const auto close = planted_bubbles(h, 2.0 * M_PI, {{s.up(M_PI, 2.0 * M_PI), 0.1}, {s.up(0.0, M_PI), 0.05}});
  const auto r2 = extract_bubbles(close, s.S, 1.0);
  CHECK(r2.J < 2);
  CHECK_FALSE(r2.errors.empty());

  const RadialGrid k(4.0, 1024);
  CHECK_THROWS_AS(extract_bubbles(planted_bubbles(k, M_PI, {{s.up(0.0, M_PI), 1.0}}), s.S, 1.0), PreconditionError);
}

TEST_CASE("residual_norms: exact decomposition and a radiation bump") {
  Setup s;
  const RadialGrid g(8.0, 16000);
  const auto q = s.up(0.0, M_PI);
  const auto f = planted_bubbles(g, M_PI, {{q, 1e-2}});
  const auto rep = extract_bubbles(f, s.S, 2.0);
  REQUIRE(rep.J == 1);
  const auto n0 = residual_norms(rep);
  CHECK(n0.hxl2 < 1e-3);
  CHECK(n0.sup < 1e-3);

  auto g2 = f;
  RadialField bump = bump_data(g, 0.0, {{0.05, 1.0, 0.5}});
  for (std::size_t i = 0; i <= g.n(); ++i) g2.psi[i] += bump.psi[i];
  const auto rep2 = extract_bubbles(g2, s.S, 2.0);
  REQUIRE(rep2.J == 1);
  const auto n1 = residual_norms(rep2, {1.0});
  REQUIRE(n1.windows.size() == 2);
  const double bump_norm = h_norms(bump, 0.0, 1.0).HxL2();
  CHECK(n1.windows[0].norm < 0.1 * bump_norm);
  CHECK(n1.windows[1].norm == doctest::Approx(bump_norm).epsilon(0.05));
}

TEST_CASE("extend_H: zero, constant ramps, and the bound on random data") {
  const RadialGrid g(8.0, 512);
  const auto z = extend_H(RadialField::constant(g, 0.0), 1.0, 2.0, 0.0);
  for (double v : z.field.psi) CHECK(v == 0.0);
  CHECK(z.psi_h_sq == 0.0);

  for (double c : {1.0, -2.0}) {
    RadialField f = RadialField::constant(g, c);
    const auto e = extend_H(f, 1.0, 2.0, 0.0);
    CHECK(e.inner_gradient == doctest::Approx(1.5 * c * c).epsilon(1e-12));
    CHECK(e.inner_zeroth == doctest::Approx((std::log(2.0) - 0.5) * c * c).epsilon(1e-12));
    CHECK(e.outer_zeroth == doctest::Approx((4.0 * std::log(2.0) - 2.5) * c * c).epsilon(1e-12));
    CHECK(e.outer_gradient == doctest::Approx(1.5 * c * c).epsilon(1e-12));
    CHECK(std::sqrt(e.psi_h_sq) <= std::sqrt(e.phi_h_sq) + 3.0 * std::abs(c));
    CHECK(e.bound_ok);
    REQUIRE(e.bound_scaled.has_value());
    CHECK(e.bound_scaled_ok);
  }

  Xorshift64Star rng(17);
  for (int k = 0; k < 200; ++k) {
    RadialField f(g, 0.0, 0.0);
    for (std::size_t i = 1; i <= g.n(); ++i) f.psi[i] = rng.uniform(-1.0, 1.0);
    const double r1 = rng.uniform(0.1, 3.0);
    const auto e = extend_H(f, r1, rng.uniform(r1 + 0.1, 8.0), rng.uniform(-1.0, 1.0));
    CHECK(e.bound_ok);
    CHECK(e.slack() >= 0.0);
  }
}

TEST_CASE("pl_h_norm_sq: closed form against quadrature of the interpolant") {
  const double dr = 0.25;
  const std::vector<double> v = {0.0, 0.3, -0.2, 0.8, 0.8, 0.1, 0.0};
  const auto interp = [&](double r) {
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(r / dr), v.size() - 2);
    const double t = r / dr - static_cast<double>(i);
    return (1.0 - t) * v[i] + t * v[i + 1];
  };
  double oracle_val = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double slope = (v[i + 1] - v[i]) / dr;
    oracle_val += oracle::integrate(
        [&](double r) { return slope * slope * r + interp(r) * interp(r) / r; }, i * dr, (i + 1) * dr);
  }
  CHECK(pl_h_norm_sq(v, dr, 0, v.size() - 1) == doctest::Approx(oracle_val).epsilon(1e-10));
  CHECK(std::isinf(pl_h_norm_sq({1.0, 1.0, 1.0}, dr, 0, 2)));
}

TEST_CASE("scattering: linear trajectory, and stationary map is pre-asymptotic") {
  const RadialGrid g(120.0, 2048);
  const auto lin = evolve_linear(bump_data(g, 0.0, {{1.0, 6.0, 2.0}}), 1.0, 60.0, 32);
  const auto st = build_scattering_state_linear(lin);
  CHECK(st.alpha == "t/2");
  CHECK(st.t_star >= 4.0 * st.support);
  REQUIRE(st.match.size() == lin.frames.size());
  for (const auto& m : st.match) CHECK(m.error <= 3.0 * m.scheme_error);
  CHECK(data_support(lin.frames.front(), 0.0) == doctest::Approx(8.0).epsilon(0.01));

  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  EvolutionOptions o;
  o.detect_blowup = false;
  const auto stat = evolve(rescale_Q(q, 1.0, RadialGrid(40.0, 1024)), S, 20.0, 16, o);
  CHECK_THROWS_WITH_AS(build_scattering_state(stat, S), doctest::Contains("pre-asymptotic"), PreconditionError);
}

TEST_CASE("regular part: frames equal to pi on the cone give ell* = pi") {
  const auto S = Metric::sphere();
  const RadialGrid g(4.0, 1024);
  Trajectory tr;
  tr.dt = 0.5 * g.dr();
  tr.record_every = 8;
  for (int k = 0; k < 40; ++k) {
    RadialField f = RadialField::constant(g, M_PI, k * tr.frame_spacing());
    tr.frames.push_back(f);
  }
  BlowupRecord rec;
  rec.t_plus = tr.end_time() + 0.2;
  rec.detected_at = rec.last_valid_time = tr.end_time();
  rec.reason = "concentration";
  tr.blowup = rec;
  const auto rp = extract_regular_part(tr, S);
  CHECK(rp.ell_star == M_PI);
  CHECK(rp.settle_spread == 0.0);
  for (const auto& p : rp.trace) CHECK(p.value == M_PI);
  for (const auto& p : rp.interior_norm) CHECK(p.value < 1e-12);

  Trajectory none = tr;
  none.blowup.reset();
  CHECK_THROWS_AS(extract_regular_part(none, S), PreconditionError);
}

TEST_CASE("pythagorean report: pure linear radiation and J bound") {
  const auto S = Metric::sphere();
  const RadialGrid g(40.0, 4096);
  const auto f = bump_data(g, 0.0, {{0.01, 10.0, 3.0}});
  const auto rep = extract_bubbles(f, S, 20.0);
  CHECK(rep.J == 0);
  const auto led = pythagorean_report(rep, S);
  // The nonlinear energy differs from the linear one only at fourth order in the amplitude.
  CHECK(led.defect_fraction < 1e-4);
  CHECK(led.J_bound_ok);
  CHECK(min_bubble_energy(S, find_vanishing_set(S)) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("Pythagorean defect of planted towers shrinks with the scale separation (property)") {
  Setup s;
  const auto outer = s.up(M_PI, 2.0 * M_PI);
  const auto inner = s.up(0.0, M_PI);
  const auto model = EnergyModel::of(s.S);
  double prev = std::numeric_limits<double>::infinity();
  for (double ratio : {1e2, 1e3, 1e4}) {
    const double l1 = 1.0, l2 = l1 / ratio;
    const auto g = RadialGrid::from_spacing(l2 / 32.0, static_cast<std::size_t>(4.0 * 32.0 * ratio));
    const auto f = planted_bubbles(g, 2.0 * M_PI, {{outer, l1}, {inner, l2}});
    // Bubble energies on the same grid, so truncation and resolution errors cancel.
    const double e1 = total_energy(rescale_Q(outer, l1, g), model);
    const double e2 = total_energy(rescale_Q(inner, l2, g), model);
    const double defect = std::abs(total_energy(f, model) - e1 - e2);
    // Cross terms decay like the scale ratio.
    CHECK(defect < 20.0 / ratio);
    CHECK(defect < 0.2 * prev);
    prev = defect;
  }
}
