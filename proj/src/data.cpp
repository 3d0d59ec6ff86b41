#include "wavemap/data.hpp"

#include <algorithm>
#include <cmath>

#include "wavemap/error.hpp"

namespace wavemap {

Xorshift64Star::Xorshift64Star(std::uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ULL) {}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1DULL;
}

double Xorshift64Star::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double compact_bump(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  double u = 1.0 - x * x;
  double u2 = u * u;
  return u2 * u2;
}

RadialField bump_data(const RadialGrid& grid, double ell, const std::vector<Bump>& bumps) {
  RadialField f = RadialField::constant(grid, ell);
  for (const auto& b : bumps) {
    if (!(b.width > 0.0)) throw PreconditionError("bump width must be positive");
    if (b.center - b.width < 0.0) throw PreconditionError("bump support must stay away from the origin");
    for (std::size_t i = 1; i < grid.size(); ++i) f.psi[i] += b.amplitude * compact_bump((grid.r(i) - b.center) / b.width);
  }
  return f;
}

std::vector<Bump> random_bumps(Xorshift64Star& rng, std::size_t count, double center_lo, double center_hi,
                               double width_lo, double width_hi, double amp) {
  std::vector<Bump> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Bump b;
    b.center = rng.uniform(center_lo, center_hi);
    b.width = rng.uniform(width_lo, width_hi);
    b.amplitude = rng.uniform(-amp, amp);
    // Keep the support off the origin.
    b.width = std::min(b.width, 0.9 * b.center);
    out.push_back(b);
  }
  return out;
}

RadialField planted_bubbles(const RadialGrid& grid, double ell_outer, const std::vector<PlantedBubble>& bubbles) {
  double inner = ell_outer;
  for (const auto& b : bubbles) {
    if (!(b.lambda > 0.0)) throw PreconditionError("planted bubble scale must be positive");
    inner += b.map.ell() - b.map.m();
  }
  RadialField f(grid, inner, ell_outer);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double v = ell_outer;
    for (const auto& b : bubbles) v += b.map(grid.r(i) / b.lambda) - b.map.m();
    f.psi[i] = v;
  }
  return f;
}

RadialField collapsing_bubble(const RadialGrid& grid, const HarmonicMap& map, double lambda, double kappa,
                              double cutoff) {
  RadialField f = rescale_Q(map, lambda, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double rho = grid.r(i) / lambda;
    // Smooth step from 1 to 0 on [cutoff, 2 cutoff].
    const double x = std::clamp(rho / cutoff - 1.0, 0.0, 1.0);
    f.psi_dot[i] = kappa * map.r_dQ(rho) / lambda * compact_bump(x);
  }
  return f;
}

}  // namespace wavemap
