#include "wavemap/field.hpp"

#include <algorithm>
#include <cmath>

#include "wavemap/error.hpp"

namespace wavemap {

RadialGrid::RadialGrid(double r_max, std::size_t n_points) : dr_(r_max / static_cast<double>(n_points)), n_(n_points) {
  if (n_points < kMinPoints)
    throw PreconditionError("grid needs at least " + std::to_string(kMinPoints) + " points, got " +
                            std::to_string(n_points));
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw PreconditionError("grid r_max must be positive");
}

RadialGrid RadialGrid::from_spacing(double dr, std::size_t n_points) {
  RadialGrid g(dr * static_cast<double>(n_points), n_points);
  g.dr_ = dr;
  return g;
}

std::size_t RadialGrid::index_at_or_above(double r) const {
  if (r <= 0.0) return 0;
  double x = std::ceil(r / dr_ - 1e-9);
  return static_cast<std::size_t>(std::min<double>(x, static_cast<double>(n_)));
}

std::size_t RadialGrid::index_at_or_below(double r) const {
  if (r <= 0.0) return 0;
  double x = std::floor(r / dr_ + 1e-9);
  return static_cast<std::size_t>(std::min<double>(x, static_cast<double>(n_)));
}

RadialField::RadialField(RadialGrid g, double ell0_, double ell_inf_, double t)
    : grid(g), psi(g.size(), 0.0), psi_dot(g.size(), 0.0), ell0(ell0_), ell_inf(ell_inf_), time(t) {
  psi[0] = ell0;
}

RadialField RadialField::constant(const RadialGrid& g, double ell, double t) {
  RadialField f(g, ell, ell, t);
  std::fill(f.psi.begin(), f.psi.end(), ell);
  return f;
}

double RadialField::psi_at(double r) const {
  if (r <= 0.0) return psi.front();
  if (r >= grid.r_max()) return psi.back();
  double x = r / grid.dr();
  auto i = static_cast<std::size_t>(x);
  if (i >= grid.n()) return psi.back();
  double w = x - static_cast<double>(i);
  return (1.0 - w) * psi[i] + w * psi[i + 1];
}

bool RadialField::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(psi.begin(), psi.end(), ok) && std::all_of(psi_dot.begin(), psi_dot.end(), ok);
}

std::size_t Trajectory::nearest_frame(double t) const {
  if (frames.empty()) throw PreconditionError("trajectory has no frames");
  std::size_t best = 0;
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (std::abs(frames[i].time - t) < std::abs(frames[best].time - t)) best = i;
  return best;
}

}  // namespace wavemap
