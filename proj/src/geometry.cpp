#include "wavemap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "wavemap/error.hpp"
#include "wavemap/expression.hpp"

namespace wavemap {

Metric::Metric(Kind kind, std::string id, Function g, Function g_prime, Interval window)
    : kind_(kind), id_(std::move(id)), g_(std::move(g)), g_prime_(std::move(g_prime)), window_(window) {
  if (!(window_.hi > window_.lo)) throw PreconditionError("metric search window is empty");
}

Metric Metric::sphere() {
  constexpr double pi = std::numbers::pi;
  return Metric(Kind::sphere, "sphere", [](double x) { return std::sin(x); },
                [](double x) { return std::cos(x); }, {-4.0 * pi, 4.0 * pi});
}

Metric Metric::yang_mills() {
  return Metric(Kind::yang_mills, "yang-mills", [](double x) { return 1.0 - x * x; },
                [](double x) { return -2.0 * x; }, {-3.0, 3.0});
}

Metric Metric::custom(const std::string& g_expr, const std::string& g_prime_expr, Interval window) {
  auto g = Expression::parse(g_expr);
  auto gp = Expression::parse(g_prime_expr);
  Metric m(Kind::custom, "custom", [g](double x) { return g(x); }, [gp](double x) { return gp(x); },
           window);
  m.g_source_ = g_expr;
  m.g_prime_source_ = g_prime_expr;
  return m;
}

Metric Metric::by_name(const std::string& name) {
  if (name == "sphere") return sphere();
  if (name == "yang-mills") return yang_mills();
  throw PreconditionError("unknown metric '" + name + "'");
}

Metric Metric::with_window(Interval window) const {
  Metric m = *this;
  if (!(window.hi > window.lo)) throw PreconditionError("metric search window is empty");
  m.window_ = window;
  return m;
}

std::size_t VanishingSet::nearest_index(double x) const {
  if (roots.empty()) throw PreconditionError("vanishing set is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < roots.size(); ++i)
    if (std::abs(roots[i].value - x) < std::abs(roots[best].value - x)) best = i;
  return best;
}

std::optional<std::size_t> VanishingSet::find(double value, double tol) const {
  for (std::size_t i = 0; i < roots.size(); ++i)
    if (std::abs(roots[i].value - value) <= tol) return i;
  return std::nullopt;
}

std::optional<std::size_t> VanishingSet::above(std::size_t i) const {
  if (i + 1 < roots.size()) return i + 1;
  return std::nullopt;
}

std::optional<std::size_t> VanishingSet::below(std::size_t i) const {
  if (i > 0 && i <= roots.size()) return i - 1;
  return std::nullopt;
}

double VanishingSet::max_gap() const {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < roots.size(); ++i) m = std::max(m, roots[i + 1].value - roots[i].value);
  return m;
}

namespace {

// Sign changes and near-zeros of g on [a, b]; returns polished roots.
std::vector<double> roots_in(const Metric& metric, double a, double b, bool check_degenerate) {
  const double span = b - a;
  const auto samples = static_cast<std::size_t>(std::max(2000.0, std::ceil(span / 0.005)));
  const double h = span / static_cast<double>(samples);
  std::vector<double> xs(samples + 1), gs(samples + 1);
  for (std::size_t j = 0; j <= samples; ++j) {
    xs[j] = (j == samples) ? b : a + static_cast<double>(j) * h;
    gs[j] = metric.g(xs[j]);
  }

  auto polish = [&](double x) {
    double gp = metric.g_prime(x);
    if (gp != 0.0) {
      double step = metric.g(x) / gp;
      if (std::abs(step) < h) x -= step;
    }
    return x;
  };

  auto degenerate = [&](double x) {
    if (check_degenerate && std::abs(metric.g_prime(x)) < 1e-6)
      throw PreconditionError("degenerate root violates (A2) near " + std::to_string(x) +
                              ": g and g' both vanish");
  };

  std::vector<double> found;
  for (std::size_t j = 0; j <= samples; ++j) {
    if (std::abs(gs[j]) <= kRootTolerance) {
      double x = polish(xs[j]);
      degenerate(x);
      found.push_back(x);
      continue;
    }
    if (j < samples && std::abs(gs[j + 1]) > kRootTolerance && std::signbit(gs[j]) != std::signbit(gs[j + 1])) {
      boost::uintmax_t iters = 200;
      auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= kRootTolerance; };
      auto [lo, hi] = boost::math::tools::bisect([&](double x) { return metric.g(x); }, xs[j], xs[j + 1], tol,
                                                 iters);
      double x = polish(0.5 * (lo + hi));
      degenerate(x);
      found.push_back(x);
      continue;
    }
    // A touching zero shows up as a tiny interior minimum of |g| with no sign change.
    if (check_degenerate && j > 0 && j < samples && std::abs(gs[j]) < std::abs(gs[j - 1]) &&
        std::abs(gs[j]) < std::abs(gs[j + 1]) && std::signbit(gs[j - 1]) == std::signbit(gs[j + 1])) {
      auto [xm, fm] = boost::math::tools::brent_find_minima(
          [&](double x) { return std::abs(metric.g(x)); }, xs[j - 1], xs[j + 1], 50);
      if (fm <= 1e-10) degenerate(xm);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<double> unique;
  for (double x : found)
    if (unique.empty() || x - unique.back() > 1e-9) unique.push_back(x);
  return unique;
}

}  // namespace

VanishingSet find_vanishing_set(const Metric& metric) {
  const Interval w = metric.search_window();
  if (!(w.hi > w.lo)) throw PreconditionError("search window is empty");
  VanishingSet vs;
  vs.window = w;
  for (double x : roots_in(metric, w.lo, w.hi, true)) vs.roots.push_back({x, metric.g_prime(x), 0.0});
  for (std::size_t i = 0; i < vs.roots.size(); ++i) {
    double gap = std::numeric_limits<double>::infinity();
    if (i > 0) gap = std::min(gap, vs.roots[i].value - vs.roots[i - 1].value);
    if (i + 1 < vs.roots.size()) gap = std::min(gap, vs.roots[i + 1].value - vs.roots[i].value);
    vs.roots[i].gap = gap;
  }
  return vs;
}

double eval_G(const Metric& metric, double x) {
  if (!std::isfinite(x)) throw PreconditionError("eval_G: argument is not finite");
  if (x == 0.0) return 0.0;
  const double a = std::min(0.0, x);
  const double b = std::max(0.0, x);
  std::vector<double> cuts{a};
  for (double r : roots_in(metric, a, b, false))
    if (r > cuts.back() + 1e-12 && r < b - 1e-12) cuts.push_back(r);
  cuts.push_back(b);

  auto integrand = [&](double y) { return std::abs(metric.g(y)); };
  double total = 0.0;
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    double piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1],
                                                                                   20, 1e-13, &err);
    total += piece;
    // The leaf error estimates are in reference-interval units.
    err_total += std::abs(err) * 0.5 * (cuts[i + 1] - cuts[i]);
  }
  if (err_total > 1e-9 * std::max(1.0, total))
    throw ConvergenceError("eval_G: quadrature did not converge", err_total);
  return x > 0 ? total : -total;
}

double sup_abs_g(const Metric& metric, double a, double b) {
  if (b < a) std::swap(a, b);
  if (b == a) return std::abs(metric.g(a));
  constexpr int samples = 400;
  const double h = (b - a) / samples;
  int best = 0;
  double best_val = -1.0;
  for (int j = 0; j <= samples; ++j) {
    double v = std::abs(metric.g(a + j * h));
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  double lo = std::max(a, a + (best - 1) * h);
  double hi = std::min(b, a + (best + 1) * h);
  auto [xm, fm] = boost::math::tools::brent_find_minima([&](double x) { return -std::abs(metric.g(x)); }, lo,
                                                        hi, 52);
  (void)xm;
  return std::max(best_val, -fm);
}

AssumptionReport check_assumptions(const Metric& metric, const VanishingSet& vset, double growth_threshold) {
  AssumptionReport rep;
  const Interval w = metric.search_window();

  auto growth = [&](double k) {
    double full = eval_G(metric, k);
    double half = eval_G(metric, 0.5 * k);
    double denom = std::max(std::abs(half), 1e-300);
    return std::abs(full - half) / denom;
  };
  rep.growth_upper = w.hi > 0 ? growth(w.hi) : 0.0;
  rep.growth_lower = w.lo < 0 ? growth(w.lo) : 0.0;
  rep.a1 = rep.growth_upper >= growth_threshold && rep.growth_lower >= growth_threshold;
  rep.notes.push_back("(A1) evidenced only by tail growth of G on the search window");

  rep.a2 = true;
  for (const auto& r : vset.roots)
    if (!(r.gap > 0.0)) rep.a2 = false;
  if (vset.empty()) rep.notes.push_back("no roots in window; no finite-energy maps");

  auto near = [](double v, double target) { return std::abs(v - target) <= 1e-6; };
  rep.a3 = true;
  rep.a3_prime = true;
  for (const auto& r : vset.roots) {
    const double s = r.slope;
    const bool unit = near(s, 1.0) || near(s, -1.0);
    const bool two = near(s, 2.0) || near(s, -2.0);
    if (!unit) rep.a3 = false;
    if (!unit && !two) rep.a3_prime = false;
    const double rounded = std::round(s);
    if (!near(s, rounded) || rounded == 0.0)
      rep.notes.push_back("root " + std::to_string(r.value) + " has non-integer slope");
  }
  rep.notes.push_back("roots enumerated in [" + std::to_string(w.lo) + ", " + std::to_string(w.hi) + "] only");
  return rep;
}

}  // namespace wavemap
