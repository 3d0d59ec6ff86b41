#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace wavemap {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Target surface of revolution with metric d rho^2 + g(rho)^2 d theta.
///
/// Immutable after construction; copies share the underlying callables and
/// are safe to use from several threads.
class Metric {
public:
  enum class Kind { sphere, yang_mills, custom };
  using Function = std::function<double(double)>;

  Metric(Kind kind, std::string id, Function g, Function g_prime, Interval window);

  /// g = sin, default window [-4 pi, 4 pi].
  static Metric sphere();
  /// g = 1 - rho^2, default window [-3, 3].
  static Metric yang_mills();
  /// g and g' given as expression strings (see Expression).
  static Metric custom(const std::string& g_expr, const std::string& g_prime_expr, Interval window);
  /// Looks up "sphere" or "yang-mills".
  static Metric by_name(const std::string& name);

  Metric with_window(Interval window) const;

  Kind kind() const noexcept { return kind_; }
  const std::string& id() const noexcept { return id_; }
  Interval search_window() const noexcept { return window_; }

  double g(double x) const { return g_(x); }
  double g_prime(double x) const { return g_prime_(x); }
  /// f = g g', the nonlinearity of the radial equation.
  double f(double x) const { return g_(x) * g_prime_(x); }

  /// Source strings for custom metrics (empty for built-ins).
  const std::string& g_source() const noexcept { return g_source_; }
  const std::string& g_prime_source() const noexcept { return g_prime_source_; }

private:
  Kind kind_;
  std::string id_;
  Function g_;
  Function g_prime_;
  Interval window_;
  std::string g_source_;
  std::string g_prime_source_;
};

struct Root {
  double value = 0.0;
  /// g'(value).
  double slope = 0.0;
  /// Distance to the nearest other root in the window, +inf when alone.
  double gap = std::numeric_limits<double>::infinity();
};

/// Zeros of g inside the metric's search window, sorted increasingly.
///
/// Only the window is enumerated; the true vanishing set may be infinite.
struct VanishingSet {
  std::vector<Root> roots;
  Interval window;

  bool empty() const { return roots.empty(); }
  std::size_t size() const { return roots.size(); }

  /// Index of the root nearest to x.
  std::size_t nearest_index(double x) const;
  const Root& nearest(double x) const { return roots[nearest_index(x)]; }
  /// Index of a root equal to value within tol, if any.
  std::optional<std::size_t> find(double value, double tol = 1e-9) const;
  /// Next root strictly above / below the root at index i.
  std::optional<std::size_t> above(std::size_t i) const;
  std::optional<std::size_t> below(std::size_t i) const;
  double max_gap() const;
};

struct AssumptionReport {
  bool a1 = false;
  bool a2 = false;
  bool a3 = false;
  bool a3_prime = false;
  /// Tail growth ratios (G(K) - G(K/2)) / |G(K/2)| at each window end.
  double growth_upper = 0.0;
  double growth_lower = 0.0;
  std::vector<std::string> notes;
};

inline constexpr double kRootTolerance = 1e-12;

/// G(x) = integral of |g| over [0, x], by adaptive Gauss-Kronrod split at the
/// sign changes of g. Throws ConvergenceError when the error estimate stays
/// above tolerance.
double eval_G(const Metric& metric, double x);

/// Brackets every sign change of g in the search window and refines it to
/// kRootTolerance (bisection plus one Newton step). Throws PreconditionError
/// for a degenerate root, where g and g' vanish together.
VanishingSet find_vanishing_set(const Metric& metric);

/// `growth_threshold` is the minimum tail growth ratio accepted as evidence
/// that G is unbounded at the corresponding end of the window.
AssumptionReport check_assumptions(const Metric& metric, const VanishingSet& vset,
                                   double growth_threshold = 0.25);

/// max |g| over [a, b] (dense sampling, then Brent refinement).
double sup_abs_g(const Metric& metric, double a, double b);

}  // namespace wavemap
