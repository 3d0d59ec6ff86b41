#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wavemap/evolution.hpp"
#include "wavemap/field.hpp"
#include "wavemap/geometry.hpp"

namespace wavemap {

/// E(psi; r1, r2) split into its three densities:
/// kinetic psi_t^2 r, gradient psi_r^2 r, potential g(psi)^2 / r.
struct EnergyEntry {
  double r1 = 0.0, r2 = 0.0;
  double kinetic = 0.0;
  double gradient = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + gradient + potential; }
};

struct EnergyLedger {
  double total = 0.0;
  std::vector<EnergyEntry> by_interval;
};

/// Which energy density a field carries: the wave map energy of a metric,
/// or the linear energy with g(phi) replaced by k phi.
struct EnergyModel {
  const Metric* metric = nullptr;
  double slope = 0.0;

  static EnergyModel of(const Metric& m) { return {&m, 0.0}; }
  static EnergyModel linear(double k) { return {nullptr, std::abs(k)}; }
  double g(double psi) const { return metric ? metric->g(psi) : slope * psi; }
};

/// Node indices [i0, i1] covered by [r1, r2] (clipped to the grid; a warning
/// is appended when clipping happens).
struct NodeRange {
  std::size_t i0 = 0, i1 = 0;
  bool empty() const { return i1 <= i0; }
};
NodeRange node_range(const RadialGrid& grid, double r1, double r2, std::vector<std::string>* warnings = nullptr);

/// Kinetic and potential terms use the trapezoid rule on the nodes in the
/// interval; the gradient term integrates the piecewise-linear interpolant
/// exactly cell by cell. All three are additive at node cuts.
EnergyEntry energy_nodes(const RadialField& field, const EnergyModel& model, std::size_t i0, std::size_t i1);
EnergyEntry energy(const RadialField& field, const Metric& metric, double r1, double r2,
                   std::vector<std::string>* warnings = nullptr);
EnergyEntry energy(const RadialField& field, const EnergyModel& model, double r1, double r2,
                   std::vector<std::string>* warnings = nullptr);
inline double total_energy(const RadialField& field, const EnergyModel& model) {
  return energy_nodes(field, model, 0, field.grid.n()).total();
}

/// Ledger over consecutive intervals [cuts[0], cuts[1]], [cuts[1], cuts[2]], ...
EnergyLedger energy_ledger(const RadialField& field, const Metric& metric, const std::vector<double>& cuts);

/// Squared norms of phi = psi - ell on an interval:
///   H:  int (phi_r^2 + phi^2 / r^2) r dr
///   Hl: int (phi_r^2 + k^2 phi^2 / r^2) r dr
///   L2: int psi_t^2 r dr
struct HNorms {
  double h_sq = 0.0, hl_sq = 0.0, l2_sq = 0.0;
  double H() const { return std::sqrt(h_sq); }
  double Hl() const { return std::sqrt(hl_sq); }
  double L2() const { return std::sqrt(l2_sq); }
  double HxL2() const { return std::sqrt(h_sq + l2_sq); }
  double HlxL2() const { return std::sqrt(hl_sq + l2_sq); }
};
HNorms h_norms_nodes(const RadialField& field, double ell, double slope, std::size_t i0, std::size_t i1);
HNorms h_norms(const RadialField& field, double ell, double slope, double r1, double r2,
               std::vector<std::string>* warnings = nullptr);
inline HNorms h_norms(const RadialField& field, double ell, double slope) {
  return h_norms_nodes(field, ell, slope, 0, field.grid.n());
}

/// int_a^b (phi'^2 + k^2 phi^2 / r^2) r dr by adaptive Gauss-Kronrod (b may be +inf).
double analytic_hl_norm_sq(const std::function<double(double)>& phi, const std::function<double(double)>& dphi,
                           double slope, double a, double b);
/// int_a^b u'^2 r^(1 + 2k) dr by adaptive Gauss-Kronrod.
double analytic_weighted_norm_sq(const std::function<double(double)>& du, int k, double a, double b);

struct BoundCheck {
  double lhs = 0.0, rhs = 0.0;
  bool ok = true;
};
/// 2 |G(psi(r2)) - G(psi(r1))| against E((psi, 0); r1, r2), endpoints
/// snapped to the interval's nodes. ok = lhs <= rhs + tol * max(1, rhs).
BoundCheck pointwise_energy_bound(const RadialField& field, const Metric& metric, double r1, double r2,
                                  double tol = 1e-6);

struct SupRatio {
  double sup = 0.0, h = 0.0, ratio = 0.0;
};
/// sup |phi| against ||phi||_H on [r1, r2] (phi = psi - ell). Requires r2 >= 2 r1.
SupRatio sup_norm_vs_H(const RadialField& field, double ell, double r1, double r2);
/// sqrt(4 / ln(5/4)), the constant obtained in the proof of the sup bound.
inline double sup_norm_proof_constant() { return std::sqrt(4.0 / std::log(1.25)); }

/// Constants of the energy / H equivalence near a root ell. delta is half the
/// gap to the nearest other root (1 when isolated); C = max(M, 1/m) for the
/// inf m and sup M of (g(x) / (x - ell))^2 sampled on |x - ell| <= delta,
/// widened by 1%. delta_prime is a heuristic energy threshold: NaN selects
/// delta^2 / 4.
struct RootConstants {
  double ell = 0.0;
  double delta = 0.0;
  double C = 1.0;
  double delta_prime = 0.0;
};
RootConstants root_constants(const Metric& metric, double ell,
                             double delta_prime = std::numeric_limits<double>::quiet_NaN());

struct EquivalenceCheck {
  double sup_dev = 0.0;
  double energy = 0.0;
  double h_sq = 0.0;
  /// sup |psi - ell| <= delta on the nodes.
  bool sup_hypothesis = false;
  /// psi(r1) = ell and E <= delta_prime.
  bool energy_hypothesis = false;
  /// h_sq / C <= E <= C h_sq, asserted only when a hypothesis holds.
  bool ok = true;
  /// The energy hypothesis held without the sup hypothesis: delta_prime too large.
  bool delta_prime_violated = false;
};
/// E((psi, 0); r1, r2) against ||psi - ell||_H^2 on the snapped nodes.
EquivalenceCheck energy_h_equivalence(const RadialField& field, const Metric& metric, const RootConstants& rc,
                                      double r1, double r2, double tol = 1e-9);

enum class ConeRule {
  /// Inner radius t / 2, self-similar region [lambda t, t - A].
  global,
  /// Inner radius T+ - t, self-similar region [lambda (T+ - t), T+ - t].
  blowup,
};

struct SeriesPoint {
  double t = 0.0;
  double value = 0.0;
};

/// Energy in the self-similar region per frame; frames with an empty region are skipped.
std::vector<SeriesPoint> self_similar_energy(const Trajectory& traj, const EnergyModel& model, double lambda,
                                             double A, ConeRule rule = ConeRule::global, double t_plus = 0.0);

/// (1/s) int_{t-s}^{t+s} int_0^rho |psi_t|^2 r dr dtau with rho = t/2 or T+ - t.
/// The time integral uses the piecewise-linear interpolant between frames;
/// for s below the frame spacing a single-frame rectangle rule is used.
double kinetic_average(const Trajectory& traj, double t, double s, ConeRule rule = ConeRule::global,
                       double t_plus = 0.0);

struct TimeSelection {
  std::vector<double> times;
  std::vector<double> criterion;
};

/// Candidates t over stored frames, s over dyadic fractions rho, rho/2, ...
/// down to 4 frame spacings (windows inside the trajectory). Returns the
/// last `count` running minima of sup_s kinetic_average(t, s), ties going to
/// the later time.
TimeSelection select_times(const Trajectory& traj, std::size_t count, ConeRule rule = ConeRule::global,
                           double t_plus = 0.0);

struct ConeSample {
  double t = 0.0;
  /// Hl x L2 norm on |r - t| >= A.
  double exterior = 0.0;
  double total = 0.0;
  double kin_fraction = 0.0;
  double hl_fraction = 0.0;
  /// The shell [t - A, t + A] reaches past r_max.
  bool tainted = false;
};
std::vector<ConeSample> lightcone_concentration(const Trajectory& linear, double A);

struct ExteriorRatio {
  double ratio = 0.0;
  bool outside_hypothesis = false;
  std::string note;
};
/// Squared ratio ||phi(t)||^2_{Hl x L2(r >= t)} / ||phi(0)||^2_{Hl x L2}
/// for the linear flow with slope g'(ell). Needs phi_t(0) = 0.
ExteriorRatio exterior_energy_ratio(const RadialField& data, double slope, double t,
                                    const EvolutionOptions& opts = {});

struct EnsembleSpec {
  std::uint64_t seed = 20240601;
  std::size_t count = 100;
  double r_max = 80.0;
  std::size_t n_points = 4096;
  double t = 20.0;
  double center_lo = 5.0, center_hi = 40.0;
  double width_lo = 2.0, width_hi = 5.0;
  std::size_t max_bumps = 3;
};
struct EnsembleResult {
  std::vector<double> ratios;
  double min_ratio = 0.0;
  std::size_t argmin = 0;
  bool outside_hypothesis = false;
};
/// Empirical lower bound of the squared exterior ratio over a seeded
/// ensemble of compact bump superpositions (evaluated in parallel).
EnsembleResult exterior_energy_ensemble(const EnsembleSpec& spec, double slope);

/// Exponent 2 + 3/k of the S norm for k = |g'(ell)| in {1, 2}.
double s_norm_exponent(double slope);
/// Interpolation exponent 3 / (4 + 6/k).
double interpolation_theta(double slope);
/// int_{t0}^{t1} int |psi - ell|^p / r^2 dr dt over the frames in [t0, t1]
/// (trapezoid in space and time); the p-th root is not taken.
double s_norm(const Trajectory& traj, double ell, double slope, double t0, double t1);

/// sup_{r >= lambda t} |psi(t) - ell_inf| per frame; empty regions skipped.
std::vector<SeriesPoint> linf_outside_cone(const Trajectory& traj, double lambda);

struct SeriesRow {
  double t = 0.0;
  double E_total = 0.0, E_kin = 0.0, E_grad = 0.0, E_pot = 0.0;
  double E_selfsim = std::numeric_limits<double>::quiet_NaN();
  double sup_out_cone = std::numeric_limits<double>::quiet_NaN();
  double Hl_fraction = std::numeric_limits<double>::quiet_NaN();
  double kin_fraction = std::numeric_limits<double>::quiet_NaN();
  double E_drift = std::numeric_limits<double>::quiet_NaN();
};
/// One row per frame. The fractions use phi = psi - ell_inf with k = slope.
std::vector<SeriesRow> compute_series(const Trajectory& traj, const EnergyModel& model, double slope,
                                      double lambda, double A);

}  // namespace wavemap
