#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wavemap/diagnostics.hpp"
#include "wavemap/evolution.hpp"
#include "wavemap/field.hpp"
#include "wavemap/geometry.hpp"
#include "wavemap/statics.hpp"

namespace wavemap {

struct Thresholds {
  double delta0 = 0.0;
  double eps0 = 0.0;
  /// eta_ell per root of the window, in root order.
  std::vector<double> eta;
  std::vector<double> roots;
};

/// delta0 = inf eta_ell / 2 over roots in [-K, K], where eta_ell is the
/// smaller of the sups of |g| on the two neighbouring inter-root intervals
/// (neighbours taken from the metric's search window; a side without a
/// neighbour is skipped). eps0 is the inf over roots ell of the largest eps
/// with |g(Q(r))| <= delta0/2 for r <= sqrt(eps) and r >= 1/sqrt(eps), Q
/// ranging over normalized maps with Q(inf) = ell.
Thresholds compute_delta0(const Metric& metric, double K);

struct ExtractionOptions {
  /// Largest accepted lambda_{j+1} / lambda_j.
  double separation = 0.2;
  /// Largest accepted windowed squared H misfit, relative to E(Q).
  double misfit_fraction = 0.1;
  /// Window [lambda / A, lambda A] of the fit; 0 selects A = 1/sqrt(eps0).
  double window = 0.0;
  /// Backfitting sweeps after the inward scan.
  int refine_sweeps = 2;
  /// Bound K of the field values (0: derived from the field).
  double K = 0.0;
};

struct BubbleFit {
  HarmonicMap map;
  double lambda = 0.0;
  /// Windowed squared H misfit of the accepted fit.
  double misfit = 0.0;
  /// Radius of the |g(psi)| = delta0 crossing that seeded the fit.
  double crossing = 0.0;
};

struct BubbleLedger {
  double E_total = 0.0;
  double sum_bubbles = 0.0;
  double E_residual = 0.0;
  double defect = 0.0;
  double defect_fraction = 0.0;
};

struct BubbleReport {
  std::size_t J = 0;
  std::vector<BubbleFit> bubbles;
  /// ell + b, where psi = ell + sum_j (Q_j(r / lambda_j) - Q_j(inf)) + b.
  RadialField residual;
  /// Outer root Q_1(inf).
  double ell = 0.0;
  double slope = 0.0;
  double R = 0.0;
  BubbleLedger ledger;
  Thresholds thresholds;
  double window = 0.0;
  /// "unresolved structure" and "under-resolved scale" entries.
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  std::vector<double> scales() const;
};

/// Scans inward from R for |g(psi)| = delta0 crossings, fits a normalized
/// harmonic map at each, and continues inward from lambda_j / A.
BubbleReport extract_bubbles(const RadialField& field, const Metric& metric, double R,
                             const ExtractionOptions& opts = {});

/// psi - sum_j (Q_j(r / lambda_j) - Q_j(inf)) for the given bubbles.
RadialField subtract_bubbles(const RadialField& field, const std::vector<BubbleFit>& bubbles);

struct WindowNorm {
  double lambda = 0.0;
  double r1 = 0.0, r2 = 0.0;
  double norm = 0.0;
};
struct ResidualNorms {
  /// ||b||_{H x L2([0, R])}.
  double hxl2 = 0.0;
  /// sup_{[0, R]} |b|.
  double sup = 0.0;
  std::vector<WindowNorm> windows;
};
/// Window norms over [lambda / A, A lambda] for each bubble scale and each
/// entry of extra_scales.
ResidualNorms residual_norms(const BubbleReport& report, const std::vector<double>& extra_scales = {});

/// Per-frame sup of |b(t, r)| over r <= A lambda_j for frames with
/// |t - t0| <= A lambda_j (bubbles held static at their fitted scales).
std::vector<SeriesPoint> residual_cone_sup(const Trajectory& traj, const BubbleReport& report, double t0, double A);

struct Extension {
  /// psi - ell_target reconnected affinely to 0 on [r1/2, r1] and [r2, 2 r2].
  RadialField field;
  double r1 = 0.0, r2 = 0.0;
  /// Squared H norms (exact for the piecewise-linear interpolant).
  double phi_h_sq = 0.0;
  double psi_h_sq = 0.0;
  double sup_phi = 0.0;
  double inner_gradient = 0.0, inner_zeroth = 0.0;
  double outer_gradient = 0.0, outer_zeroth = 0.0;
  /// ||phi||_H + 3 sup|phi|.
  double bound = 0.0;
  bool bound_ok = false;
  /// (3c + 1) ||phi||_H with c = sup_norm_proof_constant(); only when r2 >= 2 r1.
  std::optional<double> bound_scaled;
  bool bound_scaled_ok = true;
  double slack() const { return bound - std::sqrt(psi_h_sq); }
};
/// H extension of (psi - ell_target) restricted to [r1, r2], snapped to nodes.
Extension extend_H(const RadialField& field, double r1, double r2, double ell_target);

/// int (phi'^2 + phi^2 / r^2) r dr of the piecewise-linear interpolant of
/// `values` on nodes [i0, i1], in closed form per cell.
double pl_h_norm_sq(const std::vector<double>& values, double dr, std::size_t i0, std::size_t i1);

struct MatchPoint {
  double t = 0.0;
  /// ||psi(t) - (ell, 0) - phi_L(t)||_{Hl x L2(r >= t/2)}.
  double error = 0.0;
  /// ||phi_L(t)||_{Hl x L2}.
  double reference = 0.0;
  /// Extension norm plus round-trip floor.
  double scheme_error = 0.0;
};

struct ScatteringState {
  double ell = 0.0;
  double slope = 0.0;
  double t_star = 0.0;
  double support = 0.0;
  /// Linear data (phi_0, phi_1) at t_star, as a linear field.
  RadialField phi_L;
  /// Cut radius alpha(t) = t / 2.
  std::string alpha = "t/2";
  double extension_norm = 0.0;
  double reversibility_floor = 0.0;
  std::vector<MatchPoint> match;
};

/// Radius beyond which the frame deviates from (ell, 0) by at most
/// rel * max deviation.
double data_support(const RadialField& field, double ell, double rel = 1e-8);

ScatteringState build_scattering_state(const Trajectory& traj, const Metric& metric,
                                       const EvolutionOptions& opts = {});
/// For linear trajectories (ell = 0, slope = traj.linear_slope).
ScatteringState build_scattering_state_linear(const Trajectory& traj, const EvolutionOptions& opts = {});

struct RegularPart {
  double ell_star = 0.0;
  double t_plus = 0.0;
  /// (t, psi(t, T+ - t)) along the backward cone.
  std::vector<SeriesPoint> trace;
  /// Max deviation of the settled trace samples from ell_star.
  double settle_spread = 0.0;
  double settle_tolerance = 0.0;
  double tau = 0.0;
  RadialField phi;
  /// Energy of phi at tau.
  double phi_energy = 0.0;
  /// (t, ||phi(t) - (ell*, 0)||_{H x L2([0, T+ - t])}).
  std::vector<SeriesPoint> interior_norm;
};
RegularPart extract_regular_part(const Trajectory& traj, const Metric& metric, const EvolutionOptions& opts = {});

struct PythagoreanLedger {
  double E_total = 0.0;
  double sum_bubbles = 0.0;
  double radiation = 0.0;
  double defect = 0.0;
  double defect_fraction = 0.0;
  double min_bubble_energy = 0.0;
  double J_bound = 0.0;
  bool J_bound_ok = true;
};
double radiation_energy(const ScatteringState& s);
double regular_energy(const RegularPart& p);
/// Without a radiation term the residual energy of the report is used.
PythagoreanLedger pythagorean_report(const BubbleReport& report, const Metric& metric,
                                     std::optional<double> radiation = std::nullopt);

/// min over adjacent roots of the window of 2 |G(m) - G(ell)|.
double min_bubble_energy(const Metric& metric, const VanishingSet& vset);

}  // namespace wavemap
