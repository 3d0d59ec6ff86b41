#include "wavemap/statics.hpp"

#include <cmath>
#include <cstdio>

#include "wavemap/error.hpp"

namespace wavemap {

namespace {

double rk4(const Metric& metric, int sign, double q, double h) {
  auto rhs = [&](double x) { return sign * metric.g(x); };
  double k1 = rhs(q);
  double k2 = rhs(q + 0.5 * h * k1);
  double k3 = rhs(q + 0.5 * h * k2);
  double k4 = rhs(q + h * k3);
  return q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Length in s needed to come within tolerance of `target`, integrating from
// the midpoint in direction `dir` (+1 forward, -1 backward).
double reach(const Metric& metric, int sign, double mid, double target, int dir) {
  constexpr std::size_t max_steps = 2'000'000;
  const double h = dir * HarmonicMap::kStep;
  double q = mid;
  double s = 0.0;
  for (std::size_t k = 0; k < max_steps; ++k) {
    if (std::abs(q - target) < HarmonicMap::kEndpointTolerance) return std::abs(s);
    double next = rk4(metric, sign, q, h);
    if (!std::isfinite(next) || std::abs(next - target) >= std::abs(q - target)) {
      throw ConvergenceError("harmonic map integration stagnated at gap " + std::to_string(std::abs(q - target)),
                             std::abs(q - target));
    }
    q = next;
    s += h;
  }
  throw ConvergenceError("harmonic map integration did not reach endpoint; gap " +
                             std::to_string(std::abs(q - target)),
                         std::abs(q - target));
}

}  // namespace

double HarmonicMap::eval_s(double s) const {
  const double s1 = s_max();
  if (s < s0_) return ell_ + (q_.front() - ell_) * std::exp(slope_ell_ * (s - s0_));
  if (s > s1) return m_ + (q_.back() - m_) * std::exp(-slope_m_ * (s - s1));
  return (*interp_)(s);
}

double HarmonicMap::deriv_s(double s) const {
  const double s1 = s_max();
  if (s < s0_) return slope_ell_ * (q_.front() - ell_) * std::exp(slope_ell_ * (s - s0_));
  if (s > s1) return -slope_m_ * (q_.back() - m_) * std::exp(-slope_m_ * (s - s1));
  return interp_->prime(s);
}

double HarmonicMap::operator()(double r) const {
  if (r <= 0.0) return ell_;
  if (std::isinf(r)) return m_;
  return eval_s(std::log(r));
}

double HarmonicMap::r_dQ(double r) const {
  if (r <= 0.0 || std::isinf(r)) return 0.0;
  return deriv_s(std::log(r));
}

HarmonicMap build_connector(const Metric& metric, const VanishingSet& vset, double ell, double m) {
  auto i = vset.find(ell);
  auto j = vset.find(m);
  if (!i) throw PreconditionError("harmonic map endpoint " + std::to_string(ell) + " is not a root of g");
  if (!j) throw PreconditionError("target endpoint outside search window");
  const auto lo = std::min(*i, *j), hi = std::max(*i, *j);
  if (hi != lo + 1) throw PreconditionError("harmonic map endpoints are not consecutive roots");

  HarmonicMap map;
  map.ell_ = vset.roots[*i].value;
  map.m_ = vset.roots[*j].value;
  map.metric_id_ = metric.id();
  map.slope_ell_ = std::abs(vset.roots[*i].slope);
  map.slope_m_ = std::abs(vset.roots[*j].slope);
  const double mid = 0.5 * (map.ell_ + map.m_);
  const double g_mid = metric.g(mid);
  const bool increasing = map.m_ > map.ell_;
  map.sign_ = ((g_mid > 0) == increasing) ? 1 : -1;

  const double s_hi = reach(metric, map.sign_, mid, map.m_, +1);
  const double s_lo = -reach(metric, map.sign_, mid, map.ell_, -1);

  // Uniform grid in s that contains s = 0 as a node.
  const std::size_t last = HarmonicMap::kSamples - 1;
  const double ds = (s_hi - s_lo) / static_cast<double>(last - 1);
  const auto k_lo = static_cast<std::size_t>(std::ceil(-s_lo / ds));
  map.ds_ = ds;
  map.s0_ = -static_cast<double>(k_lo) * ds;
  map.q_.assign(HarmonicMap::kSamples, 0.0);

  const auto sub = static_cast<std::size_t>(std::ceil(ds / HarmonicMap::kStep - 1e-12));
  const double h = ds / static_cast<double>(sub);
  map.q_[k_lo] = mid;
  double q = mid;
  for (std::size_t k = k_lo + 1; k <= last; ++k) {
    for (std::size_t n = 0; n < sub; ++n) q = rk4(metric, map.sign_, q, h);
    map.q_[k] = q;
  }
  q = mid;
  for (std::size_t k = k_lo; k-- > 0;) {
    for (std::size_t n = 0; n < sub; ++n) q = rk4(metric, map.sign_, q, -h);
    map.q_[k] = q;
  }
  std::vector<double> dq(HarmonicMap::kSamples);
  for (std::size_t k = 0; k <= last; ++k) dq[k] = map.sign_ * metric.g(map.q_[k]);
  map.interp_ = std::make_shared<const HarmonicMap::Hermite>(std::vector<double>(map.q_), std::move(dq), map.s0_, ds);

  map.energy_ = 2.0 * std::abs(eval_G(metric, map.m_) - eval_G(metric, map.ell_));
  return map;
}

HarmonicMap build_harmonic_map(const Metric& metric, const VanishingSet& vset, double ell, int direction) {
  if (direction != 1 && direction != -1) throw PreconditionError("harmonic map direction must be +1 or -1");
  auto i = vset.find(ell);
  if (!i) throw PreconditionError("harmonic map endpoint " + std::to_string(ell) + " is not a root of g");
  auto j = direction > 0 ? vset.above(*i) : vset.below(*i);
  if (!j) throw PreconditionError("target endpoint outside search window");
  return build_connector(metric, vset, vset.roots[*i].value, vset.roots[*j].value);
}

HarmonicMap build_harmonic_map(const Metric& metric, double ell, int direction) {
  return build_harmonic_map(metric, find_vanishing_set(metric), ell, direction);
}

RadialField rescale_Q(const HarmonicMap& map, double lambda, const RadialGrid& grid,
                      std::vector<std::string>* warnings) {
  if (!(lambda > 0.0)) throw PreconditionError("rescale_Q: lambda must be positive");
  if (lambda < 4.0 * grid.dr() && warnings)
    warnings->push_back("under-resolved bubble: lambda " + std::to_string(lambda) + " < 4 dr");
  RadialField f(grid, map.ell(), map.m());
  for (std::size_t i = 1; i < grid.size(); ++i) f.psi[i] = map(grid.r(i) / lambda);
  return f;
}

std::string export_profile(const HarmonicMap& map, double r_min, double r_max, std::size_t points) {
  if (!(r_min > 0.0) || !(r_max > r_min) || points < 2)
    throw PreconditionError("export_profile: need 0 < r_min < r_max and at least 2 points");
  std::string out = "# r Q\n";
  char buf[96];
  const double a = std::log(r_min), b = std::log(r_max);
  for (std::size_t k = 0; k < points; ++k) {
    double r = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", r, map(r));
    out += buf;
  }
  return out;
}

}  // namespace wavemap
