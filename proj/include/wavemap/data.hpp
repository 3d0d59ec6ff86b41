#pragma once

#include <cstdint>
#include <vector>

#include "wavemap/field.hpp"
#include "wavemap/statics.hpp"

namespace wavemap {

/// xorshift64* (Vigna 2016): state ^= state >> 12, ^= state << 25,
/// ^= state >> 27, output state * 0x2545F4914F6CDD1D. A zero seed is
/// replaced by a fixed nonzero constant.
class Xorshift64Star {
public:
  explicit Xorshift64Star(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::uint64_t state_;
};

/// Compact C^3 bump (1 - x^2)^4 on |x| < 1.
double compact_bump(double x);

struct Bump {
  double amplitude = 0.1;
  double center = 5.0;
  /// Half-width of the support.
  double width = 2.0;
};

/// (ell + sum of bumps, 0) on the grid; both limits equal ell.
RadialField bump_data(const RadialGrid& grid, double ell, const std::vector<Bump>& bumps);

/// Random superposition of `count` compact bumps with centers in
/// [center_lo, center_hi], half-widths in [width_lo, width_hi] and
/// amplitudes in [-amp, amp]; zero velocity.
std::vector<Bump> random_bumps(Xorshift64Star& rng, std::size_t count, double center_lo, double center_hi,
                               double width_lo, double width_hi, double amp);

struct PlantedBubble {
  HarmonicMap map;
  double lambda = 1.0;
};

/// ell_outer + sum_j (Q_j(r / lambda_j) - Q_j(inf)), zero velocity. With
/// chained endpoints Q_{j+1}(inf) = Q_j(0) the value at the origin is the
/// innermost Q_J(0).
RadialField planted_bubbles(const RadialGrid& grid, double ell_outer, const std::vector<PlantedBubble>& bubbles);

/// Bubble at scale lambda with velocity kappa * (r Q'(r / lambda)) / lambda,
/// cut off smoothly past cutoff * lambda; kappa > 0 makes it shrink.
RadialField collapsing_bubble(const RadialGrid& grid, const HarmonicMap& map, double lambda, double kappa,
                              double cutoff);

}  // namespace wavemap
