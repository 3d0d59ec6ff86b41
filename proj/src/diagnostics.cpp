#include "wavemap/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wavemap/data.hpp"
#include "wavemap/error.hpp"
#include "wavemap/kernels.hpp"

namespace wavemap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double trap_weight(std::size_t i, std::size_t i0, std::size_t i1) { return (i == i0 || i == i1) ? 0.5 : 1.0; }

}  // namespace

NodeRange node_range(const RadialGrid& grid, double r1, double r2, std::vector<std::string>* warnings) {
  if (r2 < r1) std::swap(r1, r2);
  if ((r1 < 0.0 || r2 > grid.r_max() * (1.0 + 1e-12)) && warnings)
    warnings->push_back("interval [" + std::to_string(r1) + ", " + std::to_string(r2) + "] clipped to the grid");
  r1 = std::max(r1, 0.0);
  r2 = std::min(r2, grid.r_max());
  NodeRange nr;
  nr.i0 = grid.index_at_or_above(r1);
  nr.i1 = grid.index_at_or_below(r2);
  if (nr.i1 < nr.i0) nr.i1 = nr.i0;
  return nr;
}

EnergyEntry energy_nodes(const RadialField& field, const EnergyModel& model, std::size_t i0, std::size_t i1) {
  const auto& grid = field.grid;
  EnergyEntry e;
  e.r1 = grid.r(i0);
  e.r2 = grid.r(i1);
  if (i1 <= i0) return e;
  const double dr = grid.dr();
  const double* psi = field.psi.data();
  const double* dot = field.psi_dot.data();
  e.kinetic = kernels::block_sum(i0, i1 + 1, [&](std::size_t i) {
    return trap_weight(i, i0, i1) * dot[i] * dot[i] * grid.r(i) * dr;
  });
  e.potential = kernels::block_sum(i0, i1 + 1, [&](std::size_t i) {
    if (i == 0) return 0.0;
    const double gv = model.g(psi[i]);
    return trap_weight(i, i0, i1) * gv * gv / grid.r(i) * dr;
  });
  e.gradient = kernels::block_sum(i0, i1, [&](std::size_t i) {
    const double d = (psi[i + 1] - psi[i]) / dr;
    return d * d * (grid.r(i) + 0.5 * dr) * dr;
  });
  return e;
}

EnergyEntry energy(const RadialField& field, const EnergyModel& model, double r1, double r2,
                   std::vector<std::string>* warnings) {
  auto nr = node_range(field.grid, r1, r2, warnings);
  return energy_nodes(field, model, nr.i0, nr.i1);
}

EnergyEntry energy(const RadialField& field, const Metric& metric, double r1, double r2,
                   std::vector<std::string>* warnings) {
  return energy(field, EnergyModel::of(metric), r1, r2, warnings);
}

EnergyLedger energy_ledger(const RadialField& field, const Metric& metric, const std::vector<double>& cuts) {
  EnergyLedger ledger;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    auto e = energy(field, metric, cuts[k], cuts[k + 1]);
    ledger.total += e.total();
    ledger.by_interval.push_back(e);
  }
  return ledger;
}

HNorms h_norms_nodes(const RadialField& field, double ell, double slope, std::size_t i0, std::size_t i1) {
  HNorms h;
  if (i1 <= i0) return h;
  const auto& grid = field.grid;
  const double dr = grid.dr();
  const double* psi = field.psi.data();
  const double* dot = field.psi_dot.data();
  const double grad = kernels::block_sum(i0, i1, [&](std::size_t i) {
    const double d = (psi[i + 1] - psi[i]) / dr;
    return d * d * (grid.r(i) + 0.5 * dr) * dr;
  });
  const double zeroth = kernels::block_sum(i0, i1 + 1, [&](std::size_t i) {
    if (i == 0) return 0.0;
    const double p = psi[i] - ell;
    return trap_weight(i, i0, i1) * p * p / grid.r(i) * dr;
  });
  h.l2_sq = kernels::block_sum(i0, i1 + 1, [&](std::size_t i) {
    return trap_weight(i, i0, i1) * dot[i] * dot[i] * grid.r(i) * dr;
  });
  h.h_sq = grad + zeroth;
  h.hl_sq = grad + slope * slope * zeroth;
  return h;
}

HNorms h_norms(const RadialField& field, double ell, double slope, double r1, double r2,
               std::vector<std::string>* warnings) {
  auto nr = node_range(field.grid, r1, r2, warnings);
  return h_norms_nodes(field, ell, slope, nr.i0, nr.i1);
}

namespace {

template <class F>
double integrate(F f, double a, double b) {
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, 1e-13, &err);
  return v;
}

}  // namespace

double analytic_hl_norm_sq(const std::function<double(double)>& phi, const std::function<double(double)>& dphi,
                           double slope, double a, double b) {
  const double k2 = slope * slope;
  return integrate(
      [&](double r) {
        if (r <= 0.0) return 0.0;
        const double p = phi(r), d = dphi(r);
        return (d * d + k2 * p * p / (r * r)) * r;
      },
      a, b);
}

double analytic_weighted_norm_sq(const std::function<double(double)>& du, int k, double a, double b) {
  return integrate(
      [&](double r) {
        const double d = du(r);
        return d * d * std::pow(r, 1 + 2 * k);
      },
      a, b);
}

RootConstants root_constants(const Metric& metric, double ell, double delta_prime) {
  const auto vset = find_vanishing_set(metric);
  RootConstants rc;
  rc.ell = ell;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& root : vset.roots)
    if (std::abs(root.value - ell) > 1e-9) gap = std::min(gap, std::abs(root.value - ell));
  rc.delta = std::isfinite(gap) ? 0.5 * gap : 1.0;
  constexpr int samples = 4000;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int j = -samples; j <= samples; ++j) {
    if (j == 0) continue;
    const double d = rc.delta * j / samples;
    const double q = metric.g(ell + d) / d;
    lo = std::min(lo, q * q);
    hi = std::max(hi, q * q);
  }
  if (!(lo > 0.0)) throw PreconditionError("root_constants: g vanishes near " + std::to_string(ell));
  rc.C = 1.01 * std::max({1.0, hi, 1.0 / lo});
  rc.delta_prime = std::isnan(delta_prime) ? 0.25 * rc.delta * rc.delta : delta_prime;
  return rc;
}

EquivalenceCheck energy_h_equivalence(const RadialField& field, const Metric& metric, const RootConstants& rc,
                                      double r1, double r2, double tol) {
  EquivalenceCheck c;
  const auto nr = node_range(field.grid, r1, r2);
  if (nr.empty()) return c;
  for (std::size_t i = nr.i0; i <= nr.i1; ++i) c.sup_dev = std::max(c.sup_dev, std::abs(field.psi[i] - rc.ell));
  RadialField stat = field;
  std::fill(stat.psi_dot.begin(), stat.psi_dot.end(), 0.0);
  c.energy = energy_nodes(stat, EnergyModel::of(metric), nr.i0, nr.i1).total();
  c.h_sq = h_norms_nodes(field, rc.ell, 1.0, nr.i0, nr.i1).h_sq;
  c.sup_hypothesis = c.sup_dev <= rc.delta;
  c.energy_hypothesis = std::abs(field.psi[nr.i0] - rc.ell) <= 1e-12 && c.energy <= rc.delta_prime;
  c.delta_prime_violated = c.energy_hypothesis && !c.sup_hypothesis;
  if (c.sup_hypothesis || c.energy_hypothesis) {
    // sin(pi)^2 ~ 1e-32 leaves a rounding floor where psi sits on the root.
    const double slack = tol * std::max(c.energy, c.h_sq) + 1e-24;
    c.ok = c.h_sq / rc.C <= c.energy + slack && c.energy <= rc.C * c.h_sq + slack;
  }
  return c;
}

BoundCheck pointwise_energy_bound(const RadialField& field, const Metric& metric, double r1, double r2, double tol) {
  auto nr = node_range(field.grid, r1, r2);
  BoundCheck b;
  if (nr.empty()) return b;
  RadialField stat = field;
  std::fill(stat.psi_dot.begin(), stat.psi_dot.end(), 0.0);
  b.rhs = energy_nodes(stat, EnergyModel::of(metric), nr.i0, nr.i1).total();
  b.lhs = 2.0 * std::abs(eval_G(metric, field.psi[nr.i1]) - eval_G(metric, field.psi[nr.i0]));
  b.ok = b.lhs <= b.rhs + tol * std::max(1.0, b.rhs);
  return b;
}

SupRatio sup_norm_vs_H(const RadialField& field, double ell, double r1, double r2) {
  if (!(r1 > 0.0) || r2 < 2.0 * r1)
    throw PreconditionError("sup_norm_vs_H needs 0 < r1 and r2 >= 2 r1");
  auto nr = node_range(field.grid, r1, r2);
  SupRatio s;
  for (std::size_t i = nr.i0; i <= nr.i1; ++i) s.sup = std::max(s.sup, std::abs(field.psi[i] - ell));
  s.h = h_norms_nodes(field, ell, 1.0, nr.i0, nr.i1).H();
  s.ratio = s.h > 0.0 ? s.sup / s.h : 0.0;
  return s;
}

std::vector<SeriesPoint> self_similar_energy(const Trajectory& traj, const EnergyModel& model, double lambda,
                                             double A, ConeRule rule, double t_plus) {
  std::vector<SeriesPoint> out;
  for (const auto& f : traj.frames) {
    double lo, hi;
    if (rule == ConeRule::global) {
      lo = lambda * f.time;
      hi = f.time - A;
    } else {
      lo = lambda * (t_plus - f.time);
      hi = t_plus - f.time;
    }
    if (!(hi > lo) || lo >= f.grid.r_max()) continue;
    auto nr = node_range(f.grid, lo, std::min(hi, f.grid.r_max()));
    if (nr.empty()) continue;
    out.push_back({f.time, energy_nodes(f, model, nr.i0, nr.i1).total()});
  }
  return out;
}

namespace {

// Cumulative int_0^{r_i} psi_t^2 r dr (trapezoid) per frame.
std::vector<double> kinetic_prefix(const RadialField& f) {
  const auto& g = f.grid;
  std::vector<double> c(g.size(), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = f.psi_dot[i - 1] * f.psi_dot[i - 1] * g.r(i - 1);
    const double b = f.psi_dot[i] * f.psi_dot[i] * g.r(i);
    c[i] = c[i - 1] + 0.5 * (a + b) * g.dr();
  }
  return c;
}

double prefix_at(const std::vector<double>& c, double dr, double rho) {
  if (rho <= 0.0) return 0.0;
  const double x = rho / dr;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= c.size()) return c.back();
  const double w = x - static_cast<double>(i);
  return (1.0 - w) * c[i] + w * c[i + 1];
}

double inner_radius(ConeRule rule, double t, double t_plus) { return rule == ConeRule::global ? 0.5 * t : t_plus - t; }

struct KineticTable {
  const Trajectory& traj;
  std::vector<std::vector<double>> prefix;

  explicit KineticTable(const Trajectory& tr) : traj(tr), prefix(tr.frames.size()) {
    const auto n = static_cast<long long>(tr.frames.size());
#pragma omp parallel for schedule(static) num_threads(kernels::thread_cap())
    for (long long j = 0; j < n; ++j) prefix[static_cast<std::size_t>(j)] = kinetic_prefix(tr.frames[static_cast<std::size_t>(j)]);
  }

  double f(std::size_t j, double rho) const { return prefix_at(prefix[j], traj.frames[j].grid.dr(), rho); }

  // (1/s) int_{t-s}^{t+s} f(tau, rho) dtau, piecewise linear in tau.
  double average(double t, double s, double rho) const {
    const double t0 = traj.start_time(), t1 = traj.end_time();
    const double h = traj.frames.size() > 1 ? traj.frames[1].time - traj.frames[0].time : 0.0;
    const double eps = 1e-9 * std::max(1.0, std::abs(t1));
    if (!(s > 0.0)) throw PreconditionError("kinetic_average: s must be positive");
    if (t - s < t0 - eps || t + s > t1 + eps)
      throw PreconditionError("kinetic_average: window [t - s, t + s] exceeds the trajectory");
    if (h <= 0.0 || s < h) return 2.0 * f(traj.nearest_frame(t), rho);
    const double a = std::max(t - s, t0), b = std::min(t + s, t1);
    auto value_at = [&](double tau) {
      double x = (tau - t0) / h;
      auto j = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, static_cast<double>(traj.frames.size() - 1)));
      if (j + 1 >= traj.frames.size()) return f(traj.frames.size() - 1, rho);
      double w = x - static_cast<double>(j);
      return (1.0 - w) * f(j, rho) + w * f(j + 1, rho);
    };
    // Integrate the interpolant exactly: break at frame times.
    double total = 0.0;
    double lo = a;
    while (lo < b - eps) {
      double x = (lo - t0) / h;
      double next = t0 + (std::floor(x + 1e-9) + 1.0) * h;
      double hi = std::min(next, b);
      total += 0.5 * (value_at(lo) + value_at(hi)) * (hi - lo);
      lo = hi;
    }
    return total / s;
  }
};

}  // namespace

double kinetic_average(const Trajectory& traj, double t, double s, ConeRule rule, double t_plus) {
  if (traj.empty()) throw PreconditionError("kinetic_average: empty trajectory");
  KineticTable table(traj);
  return table.average(t, s, inner_radius(rule, t, t_plus));
}

TimeSelection select_times(const Trajectory& traj, std::size_t count, ConeRule rule, double t_plus) {
  TimeSelection sel;
  if (traj.frames.size() < 10) throw PreconditionError("select_times needs at least 10 frames");
  KineticTable table(traj);
  const double h = traj.frames[1].time - traj.frames[0].time;
  const double t0 = traj.start_time(), t1 = traj.end_time();
  const double eps = 1e-9 * std::max(1.0, std::abs(t1));

  std::vector<double> cand_t, cand_v;
  for (const auto& fr : traj.frames) {
    const double t = fr.time;
    const double rho = inner_radius(rule, t, t_plus);
    if (!(rho > 0.0)) continue;
    double best = -1.0;
    for (double s = rho; s >= 4.0 * h - eps; s *= 0.5) {
      if (t - s < t0 - eps || t + s > t1 + eps) continue;
      best = std::max(best, table.average(t, s, rho));
    }
    if (best < 0.0) continue;
    cand_t.push_back(t);
    cand_v.push_back(best);
  }
  double running = std::numeric_limits<double>::infinity();
  std::vector<double> rt, rv;
  for (std::size_t k = 0; k < cand_t.size(); ++k) {
    if (cand_v[k] <= running) {
      running = cand_v[k];
      rt.push_back(cand_t[k]);
      rv.push_back(cand_v[k]);
    }
  }
  const std::size_t start = rt.size() > count ? rt.size() - count : 0;
  sel.times.assign(rt.begin() + static_cast<std::ptrdiff_t>(start), rt.end());
  sel.criterion.assign(rv.begin() + static_cast<std::ptrdiff_t>(start), rv.end());
  return sel;
}

std::vector<ConeSample> lightcone_concentration(const Trajectory& linear, double A) {
  const double k = linear.linear_slope;
  std::vector<ConeSample> out;
  for (const auto& f : linear.frames) {
    ConeSample c;
    c.t = f.time;
    const auto& g = f.grid;
    auto full = h_norms(f, 0.0, k);
    c.total = full.HlxL2();
    const double tot_sq = full.hl_sq + full.l2_sq;
    c.kin_fraction = tot_sq > 0.0 ? full.l2_sq / tot_sq : 0.0;
    c.hl_fraction = tot_sq > 0.0 ? full.hl_sq / tot_sq : 0.0;
    double ext = 0.0;
    if (f.time - A > 0.0) {
      auto n = h_norms_nodes(f, 0.0, k, 0, g.index_at_or_below(f.time - A));
      ext += n.hl_sq + n.l2_sq;
    }
    if (f.time + A <= g.r_max()) {
      auto n = h_norms_nodes(f, 0.0, k, g.index_at_or_above(f.time + A), g.n());
      ext += n.hl_sq + n.l2_sq;
    } else {
      c.tainted = true;
    }
    c.exterior = std::sqrt(ext);
    out.push_back(c);
  }
  return out;
}

ExteriorRatio exterior_energy_ratio(const RadialField& data, double slope, double t, const EvolutionOptions& opts) {
  ExteriorRatio res;
  const double ka = std::abs(slope);
  const double kr = std::round(ka);
  if (kr < 1.0 || std::abs(ka - kr) > 1e-9)
    throw PreconditionError("exterior energy ratio: hypothesis 'g'(ell) is an integer' fails");
  for (double v : data.psi_dot)
    if (v != 0.0) throw PreconditionError("exterior energy ratio: hypothesis 'd_t phi(0) = 0' fails");
  if (static_cast<long long>(kr) % 2 == 0) {
    res.outside_hypothesis = true;
    res.note = "outside odd-slope hypothesis: g'(ell) = " + std::to_string(static_cast<long long>(kr)) + " is even";
  }
  auto n0 = h_norms(data, 0.0, ka);
  const double base = n0.hl_sq + n0.l2_sq;
  if (!(base > 0.0)) throw PreconditionError("exterior energy ratio: zero data");
  if (t == 0.0) {
    res.ratio = 1.0;
    return res;
  }
  const double tt = std::abs(t);
  const std::size_t steps = plan_steps(data.grid, tt, 1, opts.cfl);
  Stepper st(ka, data, tt / static_cast<double>(steps), opts.boundary, opts.exec);
  for (std::size_t k = 0; k < steps; ++k)
    if (!st.step()) throw NumericalBlowup("numerical blow-up in linear flow", st.state().time);
  const auto& f = st.state();
  if (tt > f.grid.r_max()) throw PreconditionError("exterior energy ratio: t exceeds the grid");
  auto ext = h_norms_nodes(f, 0.0, ka, f.grid.index_at_or_above(tt), f.grid.n());
  res.ratio = (ext.hl_sq + ext.l2_sq) / base;
  return res;
}

EnsembleResult exterior_energy_ensemble(const EnsembleSpec& spec, double slope) {
  const RadialGrid grid(spec.r_max, spec.n_points);
  Xorshift64Star rng(spec.seed);
  std::vector<std::vector<Bump>> data(spec.count);
  for (auto& d : data) {
    const auto nb = 1 + static_cast<std::size_t>(rng.next() % std::max<std::size_t>(1, spec.max_bumps));
    d = random_bumps(rng, nb, spec.center_lo, spec.center_hi, spec.width_lo, spec.width_hi, 1.0);
  }
  EnsembleResult res;
  res.ratios.assign(spec.count, 0.0);
  std::vector<char> flagged(spec.count, 0);
  const auto n = static_cast<long long>(spec.count);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::thread_cap())
  for (long long j = 0; j < n; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    auto field = bump_data(grid, 0.0, data[idx]);
    field.ell0 = field.ell_inf = 0.0;
    auto r = exterior_energy_ratio(field, slope, spec.t);
    res.ratios[idx] = r.ratio;
    flagged[idx] = r.outside_hypothesis;
  }
  res.outside_hypothesis = std::any_of(flagged.begin(), flagged.end(), [](char c) { return c != 0; });
  auto it = std::min_element(res.ratios.begin(), res.ratios.end());
  res.min_ratio = it == res.ratios.end() ? 0.0 : *it;
  res.argmin = static_cast<std::size_t>(it - res.ratios.begin());
  return res;
}

double s_norm_exponent(double slope) {
  const double k = std::abs(slope);
  if (std::abs(k - 1.0) > 1e-9 && std::abs(k - 2.0) > 1e-9)
    throw PreconditionError("S norm exponent undefined: |g'(ell)| = " + std::to_string(k) + " is not 1 or 2");
  return 2.0 + 3.0 / std::round(k);
}

double interpolation_theta(double slope) {
  const double k = std::abs(slope);
  if (!(k > 0.0)) throw PreconditionError("interpolation exponent undefined for g'(ell) = 0");
  return 3.0 / (4.0 + 6.0 / k);
}

double s_norm(const Trajectory& traj, double ell, double slope, double t0, double t1) {
  const double p = s_norm_exponent(slope);
  if (!(t1 > t0) || !std::isfinite(t1 - t0)) throw PreconditionError("S norm needs a finite interval t0 < t1");
  const double eps = 1e-9 * std::max(1.0, std::abs(t1));
  std::vector<std::pair<double, double>> vals;
  for (const auto& f : traj.frames) {
    if (f.time < t0 - eps || f.time > t1 + eps) continue;
    const auto& g = f.grid;
    const double space = kernels::block_sum(1, g.size(), [&](std::size_t i) {
      const double w = i == g.n() ? 0.5 : 1.0;
      const double r = g.r(i);
      return w * std::pow(std::abs(f.psi[i] - ell), p) / (r * r) * g.dr();
    });
    vals.emplace_back(f.time, space);
  }
  double total = 0.0;
  for (std::size_t k = 1; k < vals.size(); ++k)
    total += 0.5 * (vals[k - 1].second + vals[k].second) * (vals[k].first - vals[k - 1].first);
  return total;
}

std::vector<SeriesPoint> linf_outside_cone(const Trajectory& traj, double lambda) {
  std::vector<SeriesPoint> out;
  for (const auto& f : traj.frames) {
    const double r0 = lambda * f.time;
    if (r0 > f.grid.r_max()) continue;
    double sup = 0.0;
    for (std::size_t i = f.grid.index_at_or_above(r0); i < f.grid.size(); ++i)
      sup = std::max(sup, std::abs(f.psi[i] - f.ell_inf));
    out.push_back({f.time, sup});
  }
  return out;
}

std::vector<SeriesRow> compute_series(const Trajectory& traj, const EnergyModel& model, double slope, double lambda,
                                      double A) {
  std::vector<SeriesRow> rows(traj.frames.size());
  const auto n = static_cast<long long>(rows.size());
#pragma omp parallel for schedule(static) num_threads(kernels::thread_cap())
  for (long long j = 0; j < n; ++j) {
    const auto& f = traj.frames[static_cast<std::size_t>(j)];
    auto& row = rows[static_cast<std::size_t>(j)];
    row.t = f.time;
    auto e = energy_nodes(f, model, 0, f.grid.n());
    row.E_total = e.total();
    row.E_kin = e.kinetic;
    row.E_grad = e.gradient;
    row.E_pot = e.potential;
    const double lo = lambda * f.time, hi = std::min(f.time - A, f.grid.r_max());
    if (hi > lo) {
      auto nr = node_range(f.grid, lo, hi);
      if (!nr.empty()) row.E_selfsim = energy_nodes(f, model, nr.i0, nr.i1).total();
    }
    const double r0 = lambda * f.time;
    if (r0 <= f.grid.r_max()) {
      double sup = 0.0;
      for (std::size_t i = f.grid.index_at_or_above(r0); i < f.grid.size(); ++i)
        sup = std::max(sup, std::abs(f.psi[i] - f.ell_inf));
      row.sup_out_cone = sup;
    }
    auto h = h_norms(f, f.ell_inf, slope);
    const double tot = h.hl_sq + h.l2_sq;
    if (tot > 0.0) {
      row.Hl_fraction = h.hl_sq / tot;
      row.kin_fraction = h.l2_sq / tot;
    }
  }
  if (!rows.empty() && rows.front().E_total > 0.0)
    for (auto& r : rows) r.E_drift = (r.E_total - rows.front().E_total) / rows.front().E_total;
  return rows;
}

}  // namespace wavemap
