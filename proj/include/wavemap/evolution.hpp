#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wavemap/field.hpp"
#include "wavemap/geometry.hpp"
#include "wavemap/kernels.hpp"

namespace wavemap {

enum class OuterBoundary {
  /// Node n keeps its initial value.
  fixed,
  /// Upwind outgoing condition psi_t + psi_r + (psi - ell_inf) / (2r) = 0.
  /// Approximate: reflects a small fraction of the outgoing wave.
  absorbing,
};

OuterBoundary parse_boundary(const std::string& name);
std::string boundary_name(OuterBoundary b);

inline constexpr double kMaxCfl = 0.5;

struct EvolutionOptions {
  double cfl = kMaxCfl;
  OuterBoundary boundary = OuterBoundary::fixed;
  kernels::Exec exec = kernels::Exec::automatic;
  /// Blow-up monitoring for nonlinear runs.
  bool detect_blowup = true;
  /// Steps between concentration checks.
  std::size_t check_every = 10;
  /// Fraction of the minimal bubble energy E_ell defining the concentration radius.
  double concentration_fraction = 0.9;
  /// Detection once the concentration radius is below this many grid cells.
  double floor_cells = 8.0;
};

/// Leapfrog (velocity Verlet) integrator for the semi-discrete radial
/// system, caching the acceleration between steps.
class Stepper {
public:
  /// Nonlinear flow for `metric`.
  Stepper(const Metric& metric, RadialField initial, double dt, OuterBoundary boundary = OuterBoundary::fixed,
          kernels::Exec exec = kernels::Exec::automatic);
  /// Linear flow with potential slope^2 / r^2.
  Stepper(double slope, RadialField initial, double dt, OuterBoundary boundary = OuterBoundary::fixed,
          kernels::Exec exec = kernels::Exec::automatic);

  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  /// Advances by dt; returns false (state untouched) if the update is not finite.
  bool step();
  const RadialField& state() const { return field_; }
  double dt() const { return dt_; }
  std::size_t steps_taken() const { return steps_; }

private:
  void init(double dt);

  std::optional<Metric> metric_;
  kernels::Source source_;
  RadialField field_;
  std::vector<double> acc_;
  std::vector<double> psi_prev_, dot_prev_;
  double dt_ = 0.0;
  double t0_ = 0.0;
  std::size_t steps_ = 0;
  OuterBoundary boundary_;
  kernels::Exec exec_;
};

/// One leapfrog step of the wave map equation. Refuses dt > 0.5 dr;
/// throws NumericalBlowup on a non-finite update.
RadialField step_nonlinear(const RadialField& field, const Metric& metric, double dt,
                           OuterBoundary boundary = OuterBoundary::fixed);
/// One leapfrog step of the linearized flow around a root with |g'| = slope.
RadialField step_linear(const RadialField& field, double slope, double dt,
                        OuterBoundary boundary = OuterBoundary::fixed);

/// Minimal energy of a non-constant harmonic map with Q(0) = ell
/// (0 when ell has no neighbouring root in the window).
double bubble_threshold(const Metric& metric, const VanishingSet& vset, double ell);

/// Smallest radius r with E(field; 0, r) >= threshold, if any.
std::optional<double> concentration_radius(const RadialField& field, const Metric& metric, double threshold);

/// Nonlinear evolution to t_final with frames every `record_every` steps.
/// On detected blow-up the trajectory is truncated and `blowup` filled.
Trajectory evolve(const RadialField& initial, const Metric& metric, double t_final, std::size_t record_every,
                  const EvolutionOptions& opts = {});
/// Linear evolution around a root with |g'| = slope.
Trajectory evolve_linear(const RadialField& initial, double slope, double t_final, std::size_t record_every,
                         const EvolutionOptions& opts = {});

/// Frames of a fixed-step run to t_final; dt = t_final / steps with steps a
/// multiple of record_every and dt <= cfl * dr.
std::size_t plan_steps(const RadialGrid& grid, double t_final, std::size_t record_every, double cfl);

struct TransformedField {
  std::vector<double> r;
  /// (phi / r^k) at each node; entry 0 is the limit, extrapolated from nodes 1, 2.
  std::vector<double> values;
  /// Weight exponent 1 + 2k of the first-order norm int |u'|^2 r^(1+2k) dr.
  double weight_exponent = 0.0;
  int k = 0;
};

/// (T phi)(r) = phi(r) / r^k with phi = psi - ell, k = |g'(ell)| a positive
/// integer. Throws DomainError when phi / r^k diverges at the origin.
TransformedField transform_T(const RadialField& field, double ell, double slope);

/// int |u'|^2 r^(1+2k) dr on the grid (cell midpoints, like the gradient term).
double weighted_norm_sq(const TransformedField& t);

}  // namespace wavemap
