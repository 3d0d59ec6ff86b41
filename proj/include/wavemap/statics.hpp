#pragma once

#include <memory>
#include <string>
#include <vector>

#include <boost/math/interpolators/cubic_hermite.hpp>

#include "wavemap/field.hpp"
#include "wavemap/geometry.hpp"

namespace wavemap {

/// Finite-energy harmonic map joining consecutive roots ell = Q(0) and
/// m = Q(inf), normalized so that Q(1) = (ell + m) / 2.
///
/// The profile is stored as uniform samples in s = log r together with the
/// exact slopes dQ/ds = sign * g(Q), and evaluated by cubic Hermite
/// interpolation. Outside the sampled range the linear tails
/// endpoint + c r^(-+|g'(endpoint)|) take over.
class HarmonicMap {
public:
  static constexpr std::size_t kSamples = 4096;
  static constexpr double kStep = 1e-3;
  static constexpr double kEndpointTolerance = 1e-10;

  double ell() const noexcept { return ell_; }
  double m() const noexcept { return m_; }
  /// Branch of r dQ/dr = sign * g(Q).
  int sign() const noexcept { return sign_; }
  double energy() const noexcept { return energy_; }
  const std::string& metric_id() const noexcept { return metric_id_; }
  /// |g'| at the two endpoints (tail decay exponents).
  double slope_ell() const noexcept { return slope_ell_; }
  double slope_m() const noexcept { return slope_m_; }
  double s_min() const noexcept { return s0_; }
  double s_max() const noexcept { return s0_ + ds_ * static_cast<double>(q_.size() - 1); }
  const std::vector<double>& samples() const noexcept { return q_; }

  /// Q(r); Q(0) = ell, and large r approaches m.
  double operator()(double r) const;
  /// r Q'(r) = dQ/ds.
  double r_dQ(double r) const;

  friend HarmonicMap build_connector(const Metric&, const VanishingSet&, double, double);

private:
  double eval_s(double s) const;
  double deriv_s(double s) const;

  double ell_ = 0.0, m_ = 0.0;
  int sign_ = 1;
  double energy_ = 0.0;
  std::string metric_id_;
  double slope_ell_ = 1.0, slope_m_ = 1.0;
  double s0_ = 0.0, ds_ = 0.0;
  std::vector<double> q_;
  using Hermite = boost::math::interpolators::cardinal_cubic_hermite<std::vector<double>>;
  std::shared_ptr<const Hermite> interp_;
};

/// Connector starting at root `ell` towards the next root above
/// (direction = +1) or below (direction = -1).
HarmonicMap build_harmonic_map(const Metric& metric, const VanishingSet& vset, double ell, int direction);
HarmonicMap build_harmonic_map(const Metric& metric, double ell, int direction);

/// Connector with prescribed endpoints Q(0) = ell, Q(inf) = m (consecutive roots).
HarmonicMap build_connector(const Metric& metric, const VanishingSet& vset, double ell, double m);

inline double eval_Q(const HarmonicMap& map, double r) { return map(r); }

/// Samples (Q(r / lambda), 0) on the grid. Appends "under-resolved bubble"
/// to `warnings` when lambda < 4 dr.
RadialField rescale_Q(const HarmonicMap& map, double lambda, const RadialGrid& grid,
                      std::vector<std::string>* warnings = nullptr);

/// Two-column (r, Q(r)) text on a log-spaced r grid.
std::string export_profile(const HarmonicMap& map, double r_min, double r_max, std::size_t points);

}  // namespace wavemap
