#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wavemap {

/// Uniform radial grid r_i = i * dr, i = 0..n.
///
/// Node 0 is the origin and carries the boundary value; nodes 1..n are the
/// unknowns, with node n the outer boundary at r_max = n * dr.
class RadialGrid {
public:
  static constexpr std::size_t kMinPoints = 64;

  RadialGrid() = default;
  RadialGrid(double r_max, std::size_t n_points);
  static RadialGrid from_spacing(double dr, std::size_t n_points);

  double dr() const noexcept { return dr_; }
  std::size_t n() const noexcept { return n_; }
  /// Number of stored nodes including the origin.
  std::size_t size() const noexcept { return n_ + 1; }
  double r_max() const noexcept { return static_cast<double>(n_) * dr_; }
  double r(std::size_t i) const noexcept { return static_cast<double>(i) * dr_; }

  /// Smallest node index with r_i >= r (clamped to n).
  std::size_t index_at_or_above(double r) const;
  /// Largest node index with r_i <= r (clamped to 0).
  std::size_t index_at_or_below(double r) const;

  bool operator==(const RadialGrid&) const = default;

private:
  double dr_ = 0.0;
  std::size_t n_ = 0;
};

/// One time slice (psi, d_t psi) on a radial grid.
struct RadialField {
  RadialGrid grid;
  std::vector<double> psi;
  std::vector<double> psi_dot;
  /// Limit at r = 0 (a root of g for nonlinear fields, 0 for linear ones).
  double ell0 = 0.0;
  /// Limit at r = infinity.
  double ell_inf = 0.0;
  double time = 0.0;

  RadialField() = default;
  RadialField(RadialGrid g, double ell0_, double ell_inf_, double t = 0.0);

  /// Constant field (ell, 0).
  static RadialField constant(const RadialGrid& g, double ell, double t = 0.0);

  /// Linear interpolation of psi at radius r (clamped to the grid).
  double psi_at(double r) const;
  bool finite() const;
};

struct BlowupRecord {
  /// Extrapolated blow-up time.
  double t_plus = 0.0;
  /// Time at which concentration below the resolution floor was detected.
  double detected_at = 0.0;
  /// Last time with a finite, resolved state.
  double last_valid_time = 0.0;
  /// (t, rho) samples of the concentration radius.
  std::vector<std::pair<double, double>> concentration;
  /// "concentration" or "non-finite".
  std::string reason;
};

/// Time-ordered snapshots recorded at a fixed stride.
struct Trajectory {
  std::vector<RadialField> frames;
  double dt = 0.0;
  std::size_t record_every = 1;
  std::string scheme = "leapfrog";
  double cfl = 0.0;
  std::string flow = "nonlinear";
  std::string metric_id;
  /// |g'(ell)| for linear flows.
  double linear_slope = 0.0;
  std::optional<BlowupRecord> blowup;

  double frame_spacing() const { return dt * static_cast<double>(record_every); }
  bool empty() const { return frames.empty(); }
  double start_time() const { return frames.front().time; }
  double end_time() const { return frames.back().time; }
  /// Index of the frame nearest in time to t.
  std::size_t nearest_frame(double t) const;
};

}  // namespace wavemap
