#include <cmath>

#include <doctest.h>

#include "oracles.hpp"
#include "wavemap/data.hpp"
#include "wavemap/diagnostics.hpp"
#include "wavemap/evolution.hpp"

using namespace wavemap;

namespace {
Trajectory stationary_q(double r_max, std::size_t n, double t_final) {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  const RadialGrid g(r_max, n);
  EvolutionOptions o;
  o.detect_blowup = false;
  return evolve(rescale_Q(q, 1.0, g), S, t_final, 16, o);
}
}  // namespace

TEST_CASE("energy: constants vanish, ground state carries 4") {
  const auto S = Metric::sphere();
  const RadialGrid g(50.0, 2000);
  for (double ell : {0.0, M_PI}) {
    const auto e = energy(RadialField::constant(g, ell), S, 1.0, 30.0);
    CHECK(std::abs(e.total()) < 1e-25);
  }
  const auto q = build_harmonic_map(S, 0.0, +1);
  const auto f = rescale_Q(q, 1.0, RadialGrid(1000.0, 400000));
  const double tail = 2.0 * (1.0 - std::cos(oracle::q_sphere(1000.0)));
  CHECK(std::abs(total_energy(f, EnergyModel::of(S)) - 4.0) < 1e-3);
  CHECK(std::abs(total_energy(f, EnergyModel::of(S)) - tail) < 1e-5);
}

TEST_CASE("energy_ledger: pieces add up to the total") {
  const auto S = Metric::sphere();
  const RadialGrid g(30.0, 3000);
  const auto f = bump_data(g, 0.0, {{0.7, 5.0, 3.0}, {-0.4, 15.0, 4.0}});
  const auto L = energy_ledger(f, S, {0.0, 2.0, 7.5, 20.0, 30.0});
  double sum = 0.0;
  for (const auto& e : L.by_interval) sum += e.total();
  CHECK(L.by_interval.size() == 4);
  CHECK(L.total == doctest::Approx(sum).epsilon(1e-12));
  CHECK(sum == doctest::Approx(total_energy(f, EnergyModel::of(S))).epsilon(1e-12));
}

TEST_CASE("h_norms: zero field and two quadratures for r exp(-r)") {
  const RadialGrid g(40.0, 40000);
  const auto z = RadialField::constant(g, 0.0);
  const auto hz = h_norms(z, 0.0, 1.0);
  CHECK(hz.h_sq == 0.0);
  CHECK(hz.l2_sq == 0.0);

  const auto phi = [](double r) { return r * std::exp(-r); };
  const auto dphi = [](double r) { return (1.0 - r) * std::exp(-r); };
  const double direct = analytic_hl_norm_sq(phi, dphi, 1.0, 0.0, INFINITY);
  // Through T: u = exp(-r), int u'^2 r^3 dr.
  const double via_T = analytic_weighted_norm_sq([](double r) { return -std::exp(-r); }, 1, 0.0, INFINITY);
  CHECK(std::abs(direct - via_T) < 1e-10);
  const double oracle_val =
      oracle::integrate([&](double r) { return (dphi(r) * dphi(r) + phi(r) * phi(r) / (r * r)) * r; }, 0.0, 40.0);
  CHECK(std::abs(direct - oracle_val) < 1e-10);

  RadialField f(g, 0.0, 0.0);
  for (std::size_t i = 0; i <= g.n(); ++i) f.psi[i] = phi(g.r(i));
  CHECK(std::abs(h_norms(f, 0.0, 1.0).hl_sq - direct) < 1e-5);
  // The grid form of the T identity holds to the same order.
  CHECK(std::abs(weighted_norm_sq(transform_T(f, 0.0, 1.0)) - direct) < 1e-4);
}

TEST_CASE("pointwise_energy_bound: equality on harmonic maps, property on random fields") {
  const auto S = Metric::sphere();
  const auto q = build_harmonic_map(S, 0.0, +1);
  const RadialGrid g(20.0, 20000);
  const auto f = rescale_Q(q, 1.0, g);
  for (auto [a, b] : {std::pair{0.1, 1.0}, {0.5, 3.0}, {1.0, 10.0}}) {
    const auto c = pointwise_energy_bound(f, S, a, b);
    CHECK(c.ok);
    CHECK(std::abs(c.lhs - c.rhs) < 1e-5);
  }
  const auto zc = pointwise_energy_bound(RadialField::constant(g, 0.0), S, 1.0, 2.0);
  CHECK(zc.ok);
  CHECK(zc.lhs == 0.0);

  Xorshift64Star rng(5);
  const RadialGrid h(30.0, 3000);
  const auto rnd = bump_data(h, 0.0, random_bumps(rng, 4, 3.0, 25.0, 1.0, 4.0, 2.5));
  for (int k = 0; k < 200; ++k) {
    const double a = rng.uniform(0.05, 25.0);
    const double b = rng.uniform(a + 0.1, 30.0);
    CHECK(pointwise_energy_bound(rnd, S, a, b).ok);
  }
}

TEST_CASE("energy_h_equivalence: sphere constants and generated fields near a root") {
  const auto S = Metric::sphere();
  // (sin x / x)^2 on |x| <= pi/2 ranges over [4 / pi^2, 1].
  const auto rc = root_constants(S, 0.0);
  CHECK(rc.delta == doctest::Approx(0.5 * M_PI).epsilon(1e-9));
  CHECK(rc.C == doctest::Approx(1.01 * M_PI * M_PI / 4.0).epsilon(1e-6));
  CHECK(rc.delta_prime == doctest::Approx(M_PI * M_PI / 16.0).epsilon(1e-9));
  CHECK(root_constants(S, M_PI, 0.05).delta_prime == 0.05);

  Xorshift64Star rng(17);
  const RadialGrid g(30.0, 3000);
  int sup_cases = 0, energy_cases = 0;
  for (int k = 0; k < 200; ++k) {
    const double ell = k % 2 == 0 ? 0.0 : M_PI;
    const auto rk = root_constants(S, ell);
    const double amp = rng.uniform(0.05, 1.5);
    const auto f = bump_data(g, ell, random_bumps(rng, 3, 4.0, 24.0, 1.0, 4.0, amp));
    const double a = rng.uniform(0.5, 10.0), b = rng.uniform(a + 1.0, 30.0);
    const auto c = energy_h_equivalence(f, S, rk, a, b);
    CHECK(c.ok);
    CHECK(c.sup_hypothesis == (c.sup_dev <= rk.delta));
    if (c.sup_hypothesis) {
      ++sup_cases;
      CHECK(c.h_sq / rk.C <= c.energy * (1.0 + 1e-9) + 1e-24);
      CHECK(c.energy <= rk.C * c.h_sq * (1.0 + 1e-9) + 1e-24);
    }
    // Starting at the root with energy below delta_prime keeps the field within delta.
    const auto z = energy_h_equivalence(f, S, rk, 0.0, b);
    if (z.energy_hypothesis) {
      ++energy_cases;
      CHECK_FALSE(z.delta_prime_violated);
    }
  }
  CHECK(sup_cases > 20);
  CHECK(energy_cases > 20);

  // Far from the root neither hypothesis holds and nothing is asserted.
  const auto far = energy_h_equivalence(RadialField::constant(g, 2.0), S, rc, 1.0, 10.0);
  CHECK_FALSE(far.sup_hypothesis);
  CHECK_FALSE(far.energy_hypothesis);
  CHECK(far.ok);
}

TEST_CASE("exterior energy is monotone along outgoing cones (property)") {
  const auto S = Metric::sphere();
  const RadialGrid g(60.0, 3000);
  EvolutionOptions o;
  o.detect_blowup = false;
  const auto traj = evolve(bump_data(g, 0.0, {{0.6, 10.0, 3.0}, {-0.4, 16.0, 2.0}}), S, 20.0, 50, o);
  const auto model = EnergyModel::of(S);
  // Scheme error: the measured drift of the total energy.
  const double etot = total_energy(traj.frames.front(), model);
  double slack = 0.0;
  for (const auto& fr : traj.frames) slack = std::max(slack, std::abs(total_energy(fr, model) - etot));
  CHECK(slack < 1e-4 * etot);
  for (double a : {2.0, 8.0, 14.0}) {
    const double e0 = energy(traj.frames.front(), model, a, g.r_max()).total();
    double prev = e0;
    for (const auto& fr : traj.frames) {
      const double e = energy(fr, model, a + fr.time, g.r_max()).total();
      CHECK(e <= e0 + slack);
      CHECK(e <= prev + slack);
      prev = e;
    }
  }
}

TEST_CASE("select_times: argmax stability under amplitude rescaling (property)") {
  const RadialGrid g(100.0, 1000);
  EvolutionOptions o;
  o.detect_blowup = false;
  const auto traj = evolve_linear(bump_data(g, 0.0, {{1.0, 8.0, 3.0}, {0.5, 20.0, 4.0}}), 1.0, 40.0, 10, o);
  const auto ref = select_times(traj, 5);
  REQUIRE(!ref.times.empty());
  for (double c : {0.01, 3.0}) {
    auto scaled = traj;
    for (auto& fr : scaled.frames) {
      for (auto& v : fr.psi) v *= c;
      for (auto& v : fr.psi_dot) v *= c;
    }
    const auto sel = select_times(scaled, 5);
    REQUIRE(sel.times == ref.times);
    for (std::size_t k = 0; k < sel.times.size(); ++k)
      CHECK(sel.criterion[k] == doctest::Approx(c * c * ref.criterion[k]).epsilon(1e-12));
  }
}

TEST_CASE("sup_norm_vs_H: zero and tent") {
  const RadialGrid g(8.0, 8000);
  CHECK(sup_norm_vs_H(RadialField::constant(g, 0.0), 0.0, 1.0, 4.0).ratio == 0.0);
  RadialField tent(g, 0.0, 0.0);
  for (std::size_t i = 0; i <= g.n(); ++i) {
    const double r = g.r(i);
    tent.psi[i] = r >= 1.0 && r <= 4.0 ? 1.5 - std::abs(r - 2.5) : 0.0;
  }
  const auto s = sup_norm_vs_H(tent, 0.0, 1.0, 4.0);
  CHECK(s.sup == doctest::Approx(1.5));
  CHECK(s.ratio > 0.0);
  CHECK(s.ratio <= sup_norm_proof_constant());
  CHECK(sup_norm_proof_constant() == doctest::Approx(std::sqrt(4.0 / std::log(1.25))));
}

TEST_CASE("self-similar energy, kinetic average and selection on a stationary map") {
  const auto S = Metric::sphere();
  // Tail of the ground state between the snapped nodes: E(Q; a, b) = 2 (cos Q(a) - cos Q(b)).
  auto worst_error = [&](std::size_t n) {
    const auto traj = stationary_q(40.0, n, 20.0);
    const auto series = self_similar_energy(traj, EnergyModel::of(S), 0.5, 2.0);
    REQUIRE(series.size() >= 2);
    const auto& g = traj.frames.front().grid;
    double worst = 0.0;
    for (const auto& p : series) {
      CHECK(p.t - 2.0 > 0.5 * p.t);  // empty regions skipped
      const auto nr = node_range(g, 0.5 * p.t, p.t - 2.0);
      const double exact = 2.0 * (std::cos(oracle::q_sphere(g.r(nr.i0))) - std::cos(oracle::q_sphere(g.r(nr.i1))));
      worst = std::max(worst, std::abs(p.value - exact) / exact);
    }
    // The velocity of the sampled map is pure truncation error, O(dr^2).
    CHECK(kinetic_average(traj, 10.0, 2.0) < 1e-5);
    return worst;
  };
  const double coarse = worst_error(1024), fine = worst_error(2048);
  CHECK(coarse < 1e-2);
  CHECK(coarse / fine > 3.0);
}

TEST_CASE("select_times: an exactly stationary run selects the latest frames with criterion 0") {
  const RadialGrid g(20.0, 512);
  EvolutionOptions o;
  o.detect_blowup = false;
  const auto traj = evolve(RadialField::constant(g, 0.0), Metric::sphere(), 10.0, 16, o);
  const auto sel = select_times(traj, 3);
  REQUIRE(sel.times.size() == 3);
  for (double v : sel.criterion) CHECK(v == 0.0);
  CHECK(sel.times[0] < sel.times[1]);
  CHECK(sel.times[1] < sel.times[2]);
  // No later frame admits a dyadic window s = t / 2^k >= 4h inside the run.
  const double h = traj.frame_spacing();
  for (const auto& fr : traj.frames) {
    if (fr.time <= sel.times.back() + 1e-12) continue;
    for (double s = fr.time; s >= 4.0 * h - 1e-9; s *= 0.5) CHECK(fr.time + s > traj.end_time() + 1e-9);
  }
}

TEST_CASE("select_times: values decrease along the selection of a linear run") {
  const RadialGrid g(200.0, 4096);
  const auto traj = evolve_linear(bump_data(g, 0.0, {{1.0, 10.0, 3.0}}), 1.0, 150.0, 32);
  const auto sel = select_times(traj, 6);
  REQUIRE(sel.times.size() >= 2);
  for (std::size_t k = 1; k < sel.times.size(); ++k) {
    CHECK(sel.times[k] > sel.times[k - 1]);
    CHECK(sel.criterion[k] <= sel.criterion[k - 1]);
  }
}

TEST_CASE("select_times: brute-force oracle and burst avoidance") {
  const RadialGrid g(60.0, 2048);
  auto traj = evolve_linear(bump_data(g, 0.0, {{1.0, 8.0, 3.0}}), 1.0, 80.0, 16);
  // Kinetic burst near the origin mid-run.
  const double burst = 40.0;
  for (auto& fr : traj.frames)
    if (std::abs(fr.time - burst) < 2.0)
      for (std::size_t i = 1; i < 50; ++i) fr.psi_dot[i] += 5.0;
  const auto sel = select_times(traj, 4);
  for (double t : sel.times) CHECK(std::abs(t - burst) > 2.0);
  // Oracle: brute-force sup over dyadic s of the averaged kinetic energy.
  const double h = traj.frames[1].time - traj.frames[0].time;
  for (std::size_t k = 0; k < sel.times.size(); ++k) {
    const double t = sel.times[k];
    double best = -1.0;
    for (double s = t / 2.0; s >= 4.0 * h - 1e-9; s *= 0.5)
      if (t - s >= -1e-9 && t + s <= traj.end_time() + 1e-9) best = std::max(best, kinetic_average(traj, t, s));
    CHECK(sel.criterion[k] == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("lightcone concentration and equipartition on a linear run") {
  const RadialGrid g(300.0, 8192);
  const auto data = bump_data(g, 0.0, {{1.0, 10.0, 3.0}});
  const auto traj = evolve_linear(data, 1.0, 150.0, 128);
  const auto cs = lightcone_concentration(traj, 50.0);
  const auto& first = cs.front();
  CHECK(first.t == 0.0);
  // At t = 0 the exterior is everything outside [0, A], and the bump lies inside.
  CHECK(first.exterior < 1e-12 * first.total);
  const auto& last = cs.back();
  CHECK(last.t == doctest::Approx(150.0));
  CHECK(last.exterior < 0.05 * last.total);
  CHECK(std::abs(last.kin_fraction - 0.5) < 0.02);
  CHECK(std::abs(last.hl_fraction - 0.5) < 0.02);
  CHECK_FALSE(last.tainted);
}

TEST_CASE("exterior_energy_ratio: unit at t = 0, hypothesis flag for slope 2") {
  const RadialGrid g(80.0, 2048);
  const auto data = bump_data(g, 0.0, {{1.0, 10.0, 3.0}});
  CHECK(exterior_energy_ratio(data, 1.0, 0.0).ratio == doctest::Approx(1.0).epsilon(1e-12));
  const auto r = exterior_energy_ratio(data, 1.0, 20.0);
  CHECK(r.ratio > 0.0);
  CHECK(r.ratio < 1.0);
  CHECK_FALSE(r.outside_hypothesis);
  CHECK(exterior_energy_ratio(data, 2.0, 20.0).outside_hypothesis);
}

TEST_CASE("S norm, L-infinity decay and exponents") {
  CHECK(s_norm_exponent(1.0) == 5.0);
  CHECK(s_norm_exponent(2.0) == 3.5);
  CHECK(interpolation_theta(1.0) == doctest::Approx(0.3));
  const auto S = Metric::sphere();
  const RadialGrid g(40.0, 1024);
  EvolutionOptions o;
  o.detect_blowup = false;
  const auto flat = evolve(RadialField::constant(g, M_PI), S, 5.0, 16, o);
  CHECK(s_norm(flat, M_PI, 1.0, 0.0, 5.0) < 1e-25);
  for (const auto& p : linf_outside_cone(flat, 0.5)) CHECK(p.value < 1e-13);

  const auto q = stationary_q(40.0, 4096, 20.0);
  for (const auto& p : linf_outside_cone(q, 0.5)) {
    if (p.t < 1.0) continue;
    const std::size_t i = RadialGrid(40.0, 4096).index_at_or_above(0.5 * p.t);
    const double r = RadialGrid(40.0, 4096).r(i);
    CHECK(std::abs(p.value - (M_PI - oracle::q_sphere(r))) < 1e-4);
  }

  const auto small = evolve(bump_data(RadialGrid(260.0, 2048), 0.0, {{0.1, 6.0, 2.0}}), S, 200.0, 32, o);
  const auto lf = linf_outside_cone(small, 0.5);
  CHECK(lf.back().value < 0.1 * lf.front().value);
}

TEST_CASE("compute_series: drift-free columns are consistent with direct energies") {
  const auto S = Metric::sphere();
  const RadialGrid g(40.0, 1024);
  const auto traj = evolve(bump_data(g, 0.0, {{0.1, 6.0, 2.0}}), S, 10.0, 32);
  const auto rows = compute_series(traj, EnergyModel::of(S), 1.0, 0.5, 2.0);
  REQUIRE(rows.size() == traj.frames.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].t == traj.frames[k].time);
    CHECK(rows[k].E_total == doctest::Approx(total_energy(traj.frames[k], EnergyModel::of(S))).epsilon(1e-12));
    CHECK(rows[k].E_kin + rows[k].E_grad + rows[k].E_pot == doctest::Approx(rows[k].E_total).epsilon(1e-12));
  }
}
