#include "wavemap/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "wavemap/error.hpp"
#include "wavemap/kernels.hpp"

namespace wavemap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// x - log(1 + x), summed as a series for small x to avoid cancellation.
double log_gap2(double x) {
  if (x > 0.25) return x - std::log1p(x);
  double p = x * x, sum = 0.0, sign = 1.0;
  for (int k = 2; k < 80; ++k) {
    const double term = p / k;
    sum += sign * term;
    if (term < 1e-18 * std::abs(sum)) break;
    p *= x;
    sign = -sign;
  }
  return sum;
}

// log(1 + x) - x + x^2 / 2.
double log_gap3(double x) {
  if (x > 0.25) return std::log1p(x) - x + 0.5 * x * x;
  double p = x * x * x, sum = 0.0, sign = 1.0;
  for (int k = 3; k < 80; ++k) {
    const double term = p / k;
    sum += sign * term;
    if (term < 1e-18 * std::abs(sum)) break;
    p *= x;
    sign = -sign;
  }
  return sum;
}

// int_a^{a+h} (phi'^2 + phi^2 / r^2) r dr for phi linear from u to v.
double cell_h_sq(double u, double v, double a, double h) {
  const double du = v - u;
  const double grad = du * du * (2.0 * a + h) / (2.0 * h);
  if (a == 0.0) return u == 0.0 ? grad + 0.5 * v * v : kInf;
  const double x = h / a;
  const double s = du / h;
  const double zeroth = u * u * std::log1p(x) + 2.0 * u * s * a * log_gap2(x) + s * s * a * a * log_gap3(x);
  return grad + zeroth;
}

// Squared H norm of the piecewise-linear interpolant of vals[0..count) placed
// on nodes i0..i0+count-1.
double pl_h_sq(const double* vals, std::size_t count, double dr, std::size_t i0) {
  if (count < 2) return 0.0;
  return kernels::block_sum(0, count - 1, [&](std::size_t k) {
    return cell_h_sq(vals[k], vals[k + 1], static_cast<double>(i0 + k) * dr, dr);
  });
}

class ConnectorCache {
public:
  ConnectorCache(const Metric& metric, const VanishingSet& vset) : metric_(metric), vset_(vset) {}
  // Q(0) = inner, Q(inf) = outer.
  const HarmonicMap& get(double inner, double outer) {
    auto key = std::make_pair(inner, outer);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, build_connector(metric_, vset_, inner, outer)).first;
    return it->second;
  }

private:
  const Metric& metric_;
  const VanishingSet& vset_;
  std::map<std::pair<double, double>, HarmonicMap> cache_;
};

// Crossing of |g(Q)| = level in s = log r: the outermost one if `outer`,
// else the innermost. NaN when |g(Q)| stays below the level.
double crossing_s(const HarmonicMap& q, const Metric& metric, double level, bool outer) {
  const auto& samples = q.samples();
  const std::size_t n = samples.size();
  const double s0 = q.s_min();
  const double ds = (q.s_max() - s0) / static_cast<double>(n - 1);
  auto above = [&](double s) { return std::abs(metric.g(q(std::exp(s)))) >= level; };
  std::optional<std::size_t> hit;
  if (outer) {
    for (std::size_t k = n; k-- > 0;)
      if (std::abs(metric.g(samples[k])) >= level) { hit = k; break; }
  } else {
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(metric.g(samples[k])) >= level) { hit = k; break; }
  }
  if (!hit) return std::numeric_limits<double>::quiet_NaN();
  double in = s0 + static_cast<double>(*hit) * ds;
  double out = outer ? in + ds : in - ds;
  for (int it = 0; it < 200 && std::abs(out - in) > 1e-14 * std::max(1.0, std::abs(in)); ++it) {
    const double mid = 0.5 * (in + out);
    (above(mid) ? in : out) = mid;
  }
  return 0.5 * (in + out);
}

Thresholds thresholds_impl(const Metric& metric, const VanishingSet& vset, double K, ConnectorCache& cache) {
  Thresholds th;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < vset.size(); ++i)
    if (std::abs(vset.roots[i].value) <= K * (1.0 + 1e-12) + 1e-12) idx.push_back(i);
  if (idx.empty()) throw PreconditionError("no root of g in [-" + fmt(K) + ", " + fmt(K) + "]");

  double eta_min = kInf;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i : idx) {
    double eta = kInf;
    for (auto nb : {vset.below(i), vset.above(i)}) {
      if (!nb) continue;
      const double a = vset.roots[std::min(i, *nb)].value, b = vset.roots[std::max(i, *nb)].value;
      eta = std::min(eta, sup_abs_g(metric, a, b));
      pairs.emplace_back(*nb, i);
    }
    if (std::isinf(eta)) continue;
    th.roots.push_back(vset.roots[i].value);
    th.eta.push_back(eta);
    eta_min = std::min(eta_min, eta);
  }
  if (pairs.empty()) throw PreconditionError("window contains no adjacent-root pair");
  th.delta0 = 0.5 * eta_min;

  double eps = kInf;
  for (auto [inner, outer] : pairs) {
    const auto& q = cache.get(vset.roots[inner].value, vset.roots[outer].value);
    const double lo = crossing_s(q, metric, 0.5 * th.delta0, false);
    const double hi = crossing_s(q, metric, 0.5 * th.delta0, true);
    if (std::isnan(lo) || std::isnan(hi)) continue;
    const double root = std::min(std::exp(lo), std::exp(-hi));
    eps = std::min(eps, root * root);
  }
  th.eps0 = std::isinf(eps) ? 1.0 : eps;
  return th;
}

// Q(r_i / lambda) - base on nodes [i0, i1].
void add_profile(std::vector<double>& out, const RadialGrid& grid, const HarmonicMap& q, double lambda, double base,
                 double factor, std::size_t i0, std::size_t i1) {
  const auto lo = static_cast<long long>(i0), hi = static_cast<long long>(i1);
  const bool par = kernels::run_parallel(kernels::Exec::automatic, i1 - i0 + 1);
#pragma omp parallel for schedule(static) if (par) num_threads(kernels::thread_cap())
  for (long long i = lo; i <= hi; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] += factor * (q(grid.r(k) / lambda) - base);
  }
}

struct Fit {
  double lambda = 0.0;
  double misfit = 0.0;
};

// Minimizes the squared H norm of target - Q(r / lambda) on nodes [i0, i1]
// over log lambda in [log(guess) - spread, log(guess) + spread].
Fit fit_scale(const std::vector<double>& target, const RadialGrid& grid, const HarmonicMap& q, double guess,
              double spread, std::size_t i0, std::size_t i1) {
  const std::size_t count = i1 - i0 + 1;
  std::vector<double> diff(count);
  auto objective = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    for (std::size_t k = 0; k < count; ++k) diff[k] = target[i0 + k] - q(grid.r(i0 + k) / lambda);
    return pl_h_sq(diff.data(), count, grid.dr(), i0);
  };
  const double c = std::log(guess);
  boost::uintmax_t iters = 200;
  auto res = boost::math::tools::brent_find_minima(objective, c - spread, c + spread, 40, iters);
  return {std::exp(res.first), res.second};
}

}  // namespace

double pl_h_norm_sq(const std::vector<double>& values, double dr, std::size_t i0, std::size_t i1) {
  if (i1 <= i0) return 0.0;
  if (i1 >= values.size()) throw PreconditionError("pl_h_norm_sq: node range outside the value array");
  return pl_h_sq(values.data() + i0, i1 - i0 + 1, dr, i0);
}

Thresholds compute_delta0(const Metric& metric, double K) {
  auto vset = find_vanishing_set(metric);
  ConnectorCache cache(metric, vset);
  return thresholds_impl(metric, vset, K, cache);
}

std::vector<double> BubbleReport::scales() const {
  std::vector<double> out;
  for (const auto& b : bubbles) out.push_back(b.lambda);
  return out;
}

RadialField subtract_bubbles(const RadialField& field, const std::vector<BubbleFit>& bubbles) {
  RadialField res = field;
  double ell0 = field.ell0;
  for (const auto& b : bubbles) {
    add_profile(res.psi, field.grid, b.map, b.lambda, b.map.m(), -1.0, 1, field.grid.n());
    ell0 -= b.map.ell() - b.map.m();
  }
  res.ell0 = ell0;
  res.psi[0] = ell0;
  return res;
}

BubbleReport extract_bubbles(const RadialField& field, const Metric& metric, double R,
                             const ExtractionOptions& opts) {
  const auto& grid = field.grid;
  const double dr = grid.dr();
  auto vset = find_vanishing_set(metric);
  if (vset.empty()) throw PreconditionError("metric has no roots in its search window");

  BubbleReport rep;
  if (R > grid.r_max()) {
    rep.warnings.push_back("outer limit " + fmt(R) + " clipped to r_max");
    R = grid.r_max();
  }
  const std::size_t iR = grid.index_at_or_below(R);
  if (iR < 2) throw PreconditionError("outer limit below the grid resolution");
  rep.R = grid.r(iR);

  double K = opts.K;
  if (K <= 0.0) {
    for (std::size_t i = 0; i <= iR; ++i) K = std::max(K, std::abs(field.psi[i]));
    K += 1e-6 * std::max(1.0, K);
  }
  ConnectorCache cache(metric, vset);
  rep.thresholds = thresholds_impl(metric, vset, K, cache);
  const double delta0 = rep.thresholds.delta0;
  const double eps0 = rep.thresholds.eps0;
  const double A = opts.window > 0.0 ? opts.window : 1.0 / std::sqrt(eps0);
  rep.window = A;

  const double psiR = field.psi[iR];
  if (!(std::abs(metric.g(psiR)) < delta0))
    throw PreconditionError("|g(psi(R))| = " + fmt(std::abs(metric.g(psiR))) + " is not below delta0 = " + fmt(delta0));
  const std::size_t ell_index = vset.nearest_index(psiR);
  rep.ell = vset.roots[ell_index].value;
  rep.slope = std::abs(vset.roots[ell_index].slope);

  // Remainder psi - sum_{i<j} (Q_i(r / lambda_i) - Q_i(0)), which is Q_j + b near scale lambda_j.
  std::vector<double> target = field.psi;
  std::size_t cur = ell_index;
  std::size_t i_start = iR;
  double lambda_prev = kInf;

  while (i_start >= 2) {
    const double ell_cur = vset.roots[cur].value;
    const double v_start = target[i_start];
    if (vset.nearest_index(v_start) != cur || !(std::abs(metric.g(v_start)) < delta0)) {
      rep.errors.push_back("unresolved structure: field at r = " + fmt(grid.r(i_start)) +
                           " has not settled at the root " + fmt(ell_cur));
      break;
    }
    std::optional<std::size_t> ic;
    for (std::size_t i = i_start; i-- > 1;) {
      if (std::abs(metric.g(target[i])) >= delta0) { ic = i; break; }
    }
    if (!ic) break;

    const double ga = std::abs(metric.g(target[*ic + 1]));
    const double gb = std::abs(metric.g(target[*ic]));
    const double theta = gb > ga ? (delta0 - ga) / (gb - ga) : 1.0;
    const double r_c = grid.r(*ic + 1) - theta * dr;

    const auto nb = target[*ic] > ell_cur ? vset.above(cur) : vset.below(cur);
    if (!nb) {
      rep.errors.push_back("unresolved structure at r = " + fmt(r_c) + ": no root beyond " + fmt(ell_cur) +
                           " in the search window");
      break;
    }
    const auto& q = cache.get(vset.roots[*nb].value, ell_cur);
    const double x_c = std::exp(crossing_s(q, metric, delta0, true));
    const double guess = r_c / x_c;
    if (guess < 4.0 * dr) {
      rep.errors.push_back("under-resolved scale: lambda ~ " + fmt(guess) + " below 4 dr = " + fmt(4.0 * dr));
      break;
    }
    const double lo = std::max(guess / A, dr);
    const double hi = std::min({guess * A, lambda_prev / A, rep.R});
    const std::size_t ia = grid.index_at_or_above(lo), ib = grid.index_at_or_below(hi);
    if (ib < ia + 4) {
      rep.errors.push_back("unresolved structure at r = " + fmt(r_c) + ": fit window [" + fmt(lo) + ", " + fmt(hi) +
                           "] too small");
      break;
    }
    const Fit fit = fit_scale(target, grid, q, guess, std::log(4.0), ia, ib);
    if (fit.lambda / lambda_prev > opts.separation) {
      rep.errors.push_back("unresolved structure at r = " + fmt(r_c) + ": scale ratio " +
                           fmt(fit.lambda / lambda_prev) + " above separation floor " + fmt(opts.separation));
      break;
    }
    if (fit.misfit > opts.misfit_fraction * q.energy()) {
      rep.errors.push_back("unresolved structure at r = " + fmt(r_c) + ": misfit " + fmt(fit.misfit) +
                           " above " + fmt(opts.misfit_fraction) + " E(Q)");
      break;
    }
    rep.bubbles.push_back({q, fit.lambda, fit.misfit, r_c});
    add_profile(target, grid, q, fit.lambda, q.ell(), -1.0, 1, grid.n());
    cur = *nb;
    lambda_prev = fit.lambda;
    i_start = grid.index_at_or_below(fit.lambda / A);
  }

  const std::size_t J = rep.bubbles.size();
  for (int sweep = 0; sweep < opts.refine_sweeps && J > 0; ++sweep) {
    for (std::size_t j = 0; j < J; ++j) {
      target = field.psi;
      for (std::size_t i = 0; i < J; ++i) {
        if (i == j) continue;
        const auto& b = rep.bubbles[i];
        add_profile(target, grid, b.map, b.lambda, i < j ? b.map.ell() : b.map.m(), -1.0, 1, grid.n());
      }
      auto& b = rep.bubbles[j];
      const double outer = j == 0 ? rep.R : rep.bubbles[j - 1].lambda / A;
      const double lo = std::max(b.lambda / A, dr);
      const double hi = std::min(b.lambda * A, outer);
      const std::size_t ia = grid.index_at_or_above(lo), ib = grid.index_at_or_below(hi);
      if (ib < ia + 4) continue;
      const Fit fit = fit_scale(target, grid, b.map, b.lambda, std::log(2.0), ia, ib);
      b.lambda = fit.lambda;
      b.misfit = fit.misfit;
    }
  }

  rep.J = J;
  rep.residual = subtract_bubbles(field, rep.bubbles);
  rep.residual.ell0 = rep.ell;
  rep.residual.ell_inf = rep.ell;

  auto& L = rep.ledger;
  L.E_total = total_energy(field, EnergyModel::of(metric));
  for (const auto& b : rep.bubbles) L.sum_bubbles += b.map.energy();
  const auto hn = h_norms(rep.residual, rep.ell, rep.slope);
  L.E_residual = hn.hl_sq + hn.l2_sq;
  L.defect = L.E_total - L.sum_bubbles - L.E_residual;
  L.defect_fraction = L.E_total > 0.0 ? std::abs(L.defect) / L.E_total : 0.0;
  return rep;
}

ResidualNorms residual_norms(const BubbleReport& report, const std::vector<double>& extra_scales) {
  ResidualNorms out;
  const auto& b = report.residual;
  const auto& grid = b.grid;
  out.hxl2 = h_norms(b, report.ell, 1.0, 0.0, report.R).HxL2();
  const std::size_t iR = grid.index_at_or_below(report.R);
  for (std::size_t i = 0; i <= iR; ++i) out.sup = std::max(out.sup, std::abs(b.psi[i] - report.ell));
  const double A = report.window > 0.0 ? report.window : 1.0;
  std::vector<double> scales = report.scales();
  scales.insert(scales.end(), extra_scales.begin(), extra_scales.end());
  for (double lambda : scales) {
    WindowNorm w;
    w.lambda = lambda;
    w.r1 = std::max(lambda / A, 0.0);
    w.r2 = std::min(lambda * A, grid.r_max());
    w.norm = h_norms(b, report.ell, 1.0, w.r1, w.r2).HxL2();
    out.windows.push_back(w);
  }
  return out;
}

std::vector<SeriesPoint> residual_cone_sup(const Trajectory& traj, const BubbleReport& report, double t0, double A) {
  std::vector<SeriesPoint> out;
  for (const auto& fr : traj.frames) {
    double best = -1.0;
    for (const auto& bub : report.bubbles) {
      const double reach = A * bub.lambda;
      if (std::abs(fr.time - t0) > reach) continue;
      const std::size_t top = fr.grid.index_at_or_below(reach);
      for (std::size_t i = 1; i <= top; ++i) {
        double v = fr.psi[i] - report.ell;
        for (const auto& other : report.bubbles)
          v -= other.map(fr.grid.r(i) / other.lambda) - other.map.m();
        best = std::max(best, std::abs(v));
      }
    }
    if (best >= 0.0) out.push_back({fr.time, best});
  }
  return out;
}

Extension extend_H(const RadialField& field, double r1, double r2, double ell_target) {
  const auto& grid = field.grid;
  const double dr = grid.dr();
  if (!(r1 > 0.0 && r1 < r2)) throw PreconditionError("extend_H needs 0 < r1 < r2");
  const auto snap = [&](double r) {
    return std::min<std::size_t>(grid.n(), static_cast<std::size_t>(std::llround(r / dr)));
  };
  const std::size_t i1 = std::max<std::size_t>(1, snap(r1));
  const std::size_t i2 = snap(r2);
  if (i2 <= i1) throw PreconditionError("extend_H: [r1, r2] holds fewer than two nodes");

  Extension ext;
  ext.r1 = grid.r(i1);
  ext.r2 = grid.r(i2);
  std::vector<double> phi(i2 - i1 + 1);
  for (std::size_t i = i1; i <= i2; ++i) {
    phi[i - i1] = field.psi[i] - ell_target;
    ext.sup_phi = std::max(ext.sup_phi, std::abs(phi[i - i1]));
  }
  ext.phi_h_sq = pl_h_sq(phi.data(), phi.size(), dr, i1);
  const double c = phi.front(), d = phi.back();
  const double ln2 = std::log(2.0);
  ext.inner_gradient = 1.5 * c * c;
  ext.inner_zeroth = (ln2 - 0.5) * c * c;
  ext.outer_gradient = 1.5 * d * d;
  ext.outer_zeroth = (4.0 * ln2 - 2.5) * d * d;
  ext.psi_h_sq = ext.phi_h_sq + ext.inner_gradient + ext.inner_zeroth + ext.outer_gradient + ext.outer_zeroth;

  const std::size_t n_ext = std::max(grid.n(), 2 * i2);
  ext.field = RadialField(RadialGrid::from_spacing(dr, n_ext), 0.0, 0.0, field.time);
  for (std::size_t i = 1; i <= n_ext; ++i) {
    const double r = static_cast<double>(i) * dr;
    double v = 0.0;
    if (i >= i1 && i <= i2) v = phi[i - i1];
    else if (r < ext.r1 && r >= 0.5 * ext.r1) v = c * (2.0 * r / ext.r1 - 1.0);
    else if (r > ext.r2 && r <= 2.0 * ext.r2) v = d * (2.0 - r / ext.r2);
    ext.field.psi[i] = v;
  }

  const double phi_h = std::sqrt(ext.phi_h_sq);
  const double psi_h = std::sqrt(ext.psi_h_sq);
  ext.bound = phi_h + 3.0 * ext.sup_phi;
  ext.bound_ok = psi_h <= ext.bound * (1.0 + 1e-12);
  if (ext.r2 >= 2.0 * ext.r1) {
    ext.bound_scaled = (3.0 * sup_norm_proof_constant() + 1.0) * phi_h;
    ext.bound_scaled_ok = psi_h <= *ext.bound_scaled * (1.0 + 1e-12);
  }
  return ext;
}

double data_support(const RadialField& field, double ell, double rel) {
  double peak = 0.0;
  for (std::size_t i = 0; i < field.psi.size(); ++i)
    peak = std::max({peak, std::abs(field.psi[i] - ell), std::abs(field.psi_dot[i])});
  if (peak == 0.0) return 0.0;
  for (std::size_t i = field.psi.size(); i-- > 0;) {
    if (std::abs(field.psi[i] - ell) > rel * peak || std::abs(field.psi_dot[i]) > rel * peak)
      return field.grid.r(std::min(i + 1, field.grid.n()));
  }
  return 0.0;
}

namespace {

RadialField linear_difference(const RadialField& psi, double ell, const RadialField& lin) {
  RadialField d(psi.grid, 0.0, 0.0, psi.time);
  for (std::size_t i = 0; i < psi.psi.size(); ++i) {
    d.psi[i] = psi.psi[i] - ell - lin.psi[i];
    d.psi_dot[i] = psi.psi_dot[i] - lin.psi_dot[i];
  }
  d.psi[0] = psi.psi[0] - ell - lin.psi[0];
  return d;
}

RadialField reversed(const RadialField& f) {
  RadialField r = f;
  for (double& v : r.psi_dot) v = -v;
  return r;
}

ScatteringState scattering_impl(const Trajectory& traj, double ell, double slope, const EvolutionOptions& opts) {
  if (traj.frames.size() < 10) throw PreconditionError("scattering state needs at least 10 frames");
  ScatteringState st;
  st.ell = ell;
  st.slope = slope;

  const auto sel = select_times(traj, 4, ConeRule::global);
  const double t_sel = sel.times.empty() ? traj.end_time() : sel.times.back();
  const std::size_t fs = traj.nearest_frame(t_sel);
  const auto& star = traj.frames[fs];
  st.t_star = star.time;
  st.support = data_support(traj.frames.front(), ell);
  if (st.t_star < 4.0 * st.support)
    throw PreconditionError("pre-asymptotic: t* = " + fmt(st.t_star) + " below 4 x data support " +
                            fmt(st.support));

  const auto& grid = star.grid;
  const double cut = 0.5 * st.t_star;
  const std::size_t ic = grid.index_at_or_below(cut);
  RadialField phi(grid, 0.0, 0.0, st.t_star);
  const double edge = star.psi_at(cut) - ell;
  for (std::size_t i = 0; i <= grid.n(); ++i) {
    phi.psi[i] = i <= ic ? edge * grid.r(i) / cut : star.psi[i] - ell;
    phi.psi_dot[i] = star.psi_dot[i];
  }
  phi.psi[0] = 0.0;
  st.phi_L = phi;
  {
    const auto d = linear_difference(star, ell, phi);
    st.extension_norm = h_norms(d, 0.0, slope).HlxL2();
  }

  const double dt = traj.dt > 0.0 ? traj.dt : opts.cfl * grid.dr();
  auto steps_to = [&](double t) { return static_cast<std::size_t>(std::llround(std::abs(t - st.t_star) / dt)); };

  std::vector<RadialField> lin(traj.frames.size());
  lin[fs] = phi;
  {
    Stepper fwd(slope, phi, dt, opts.boundary, opts.exec);
    std::size_t done = 0;
    for (std::size_t k = fs + 1; k < traj.frames.size(); ++k) {
      const std::size_t target = steps_to(traj.frames[k].time);
      while (done < target) { fwd.step(); ++done; }
      lin[k] = fwd.state();
      lin[k].time = traj.frames[k].time;
    }
  }
  std::size_t back_steps = 0;
  RadialField earliest = phi;
  {
    Stepper bwd(slope, reversed(phi), dt, opts.boundary, opts.exec);
    for (std::size_t k = fs; k-- > 0;) {
      const std::size_t target = steps_to(traj.frames[k].time);
      while (back_steps < target) { bwd.step(); ++back_steps; }
      lin[k] = reversed(bwd.state());
      lin[k].time = traj.frames[k].time;
    }
    earliest = bwd.state();
  }
  double floor = 0.0;
  if (back_steps > 0) {
    Stepper again(slope, reversed(earliest), dt, opts.boundary, opts.exec);
    for (std::size_t s = 0; s < back_steps; ++s) again.step();
    RadialField d = again.state();
    for (std::size_t i = 0; i < d.psi.size(); ++i) {
      d.psi[i] -= phi.psi[i];
      d.psi_dot[i] -= phi.psi_dot[i];
    }
    floor = h_norms(d, 0.0, slope).HlxL2();
  }
  const double ref_star = h_norms(phi, 0.0, slope).HlxL2();
  st.reversibility_floor = std::max(floor, 1e-12 * ref_star);

  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const auto& fr = traj.frames[k];
    MatchPoint mp;
    mp.t = fr.time;
    const auto d = linear_difference(fr, ell, lin[k]);
    mp.error = h_norms(d, 0.0, slope, 0.5 * fr.time, grid.r_max()).HlxL2();
    mp.reference = h_norms(lin[k], 0.0, slope).HlxL2();
    mp.scheme_error = st.extension_norm + st.reversibility_floor;
    st.match.push_back(mp);
  }
  return st;
}

}  // namespace

ScatteringState build_scattering_state(const Trajectory& traj, const Metric& metric, const EvolutionOptions& opts) {
  if (traj.empty()) throw PreconditionError("empty trajectory");
  const double ell = traj.frames.back().ell_inf;
  return scattering_impl(traj, ell, std::abs(metric.g_prime(ell)), opts);
}

ScatteringState build_scattering_state_linear(const Trajectory& traj, const EvolutionOptions& opts) {
  if (traj.empty()) throw PreconditionError("empty trajectory");
  return scattering_impl(traj, traj.frames.back().ell_inf, traj.linear_slope, opts);
}

RegularPart extract_regular_part(const Trajectory& traj, const Metric& metric, const EvolutionOptions& opts) {
  if (traj.empty() || !traj.blowup) throw PreconditionError("regular part needs a trajectory with a blow-up record");
  const auto vset = find_vanishing_set(metric);
  if (vset.empty()) throw PreconditionError("metric has no roots in its search window");
  const auto& rec = *traj.blowup;
  RegularPart out;
  out.t_plus = rec.t_plus;
  const double valid = rec.last_valid_time;
  const double tol_t = 1e-9 * std::max(1.0, std::abs(out.t_plus));

  for (const auto& fr : traj.frames) {
    if (fr.time > valid + tol_t) continue;
    const double rho = out.t_plus - fr.time;
    if (!(rho > 0.0) || rho > fr.grid.r_max()) continue;
    out.trace.push_back({fr.time, fr.psi_at(rho)});
  }
  if (out.trace.size() < 3)
    throw ConvergenceError("undetermined ell: fewer than 3 cone samples", kInf);

  const std::size_t settle = std::max<std::size_t>(3, out.trace.size() / 4);
  const std::size_t first = out.trace.size() - std::min(settle, out.trace.size());
  const std::size_t root = vset.nearest_index(out.trace.back().value);
  out.ell_star = vset.roots[root].value;
  const double gap = vset.roots[root].gap;
  out.settle_tolerance = 0.25 * (std::isfinite(gap) ? gap : 1.0);
  for (std::size_t k = first; k < out.trace.size(); ++k)
    out.settle_spread = std::max(out.settle_spread, std::abs(out.trace[k].value - out.ell_star));
  if (out.settle_spread > out.settle_tolerance)
    throw ConvergenceError("undetermined ell: cone trace spread " + fmt(out.settle_spread) + " exceeds " +
                               fmt(out.settle_tolerance),
                           out.settle_spread);

  std::optional<std::size_t> pick;
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const auto& fr = traj.frames[k];
    if (fr.time > valid + tol_t || !fr.finite()) continue;
    if (out.t_plus - fr.time >= 8.0 * fr.grid.dr() && out.t_plus - fr.time <= fr.grid.r_max()) pick = k;
  }
  if (!pick) throw ConvergenceError("undetermined ell: no resolved frame inside the cone", kInf);
  const auto& fr = traj.frames[*pick];
  const auto& grid = fr.grid;
  out.tau = fr.time;
  const double rho = out.t_plus - out.tau;
  const std::size_t ic = grid.index_at_or_below(rho);
  const double slope = (fr.psi_at(rho) - out.ell_star) / rho;
  RadialField phi(grid, out.ell_star, fr.ell_inf, out.tau);
  for (std::size_t i = 1; i <= grid.n(); ++i) {
    if (i <= ic) {
      phi.psi[i] = out.ell_star + slope * grid.r(i);
      phi.psi_dot[i] = 0.0;
    } else {
      phi.psi[i] = fr.psi[i];
      phi.psi_dot[i] = fr.psi_dot[i];
    }
  }
  out.phi = phi;
  out.phi_energy = total_energy(phi, EnergyModel::of(metric));

  const double dt = traj.dt > 0.0 ? std::min(traj.dt, opts.cfl * grid.dr()) : opts.cfl * grid.dr();
  const double span = rho - 2.0 * grid.dr();
  const auto steps = span > 0.0 ? static_cast<std::size_t>(std::floor(span / dt)) : 0;
  const std::size_t every = std::max<std::size_t>(1, steps / 64);
  Stepper stepper(metric, phi, dt, opts.boundary, opts.exec);
  auto sample = [&]() {
    const auto& s = stepper.state();
    const double radius = out.t_plus - s.time;
    out.interior_norm.push_back({s.time, h_norms(s, out.ell_star, 1.0, 0.0, radius).HxL2()});
  };
  sample();
  for (std::size_t s = 1; s <= steps; ++s) {
    if (!stepper.step()) break;
    if (s % every == 0 || s == steps) sample();
  }
  return out;
}

double min_bubble_energy(const Metric& metric, const VanishingSet& vset) {
  double best = kInf;
  for (std::size_t i = 0; i + 1 < vset.size(); ++i) {
    const double e = 2.0 * std::abs(eval_G(metric, vset.roots[i + 1].value) - eval_G(metric, vset.roots[i].value));
    best = std::min(best, e);
  }
  return best;
}

double radiation_energy(const ScatteringState& s) {
  const auto h = h_norms(s.phi_L, 0.0, s.slope);
  return h.hl_sq + h.l2_sq;
}

double regular_energy(const RegularPart& p) { return p.phi_energy; }

PythagoreanLedger pythagorean_report(const BubbleReport& report, const Metric& metric,
                                     std::optional<double> radiation) {
  PythagoreanLedger L;
  L.E_total = report.ledger.E_total;
  L.sum_bubbles = report.ledger.sum_bubbles;
  L.radiation = radiation ? *radiation : report.ledger.E_residual;
  L.defect = L.E_total - L.sum_bubbles - L.radiation;
  L.defect_fraction = L.E_total > 0.0 ? std::abs(L.defect) / L.E_total : 0.0;
  L.min_bubble_energy = min_bubble_energy(metric, find_vanishing_set(metric));
  L.J_bound = std::isfinite(L.min_bubble_energy) ? L.E_total / L.min_bubble_energy : kInf;
  L.J_bound_ok = static_cast<double>(report.J) <= L.J_bound * (1.0 + 1e-9) + 1e-12;
  return L;
}

}  // namespace wavemap
