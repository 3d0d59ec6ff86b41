#pragma once

#include <cstddef>
#include <vector>

#include <omp.h>

#include "wavemap/geometry.hpp"

namespace wavemap::kernels {

/// Execution policy for grid kernels. Both variants produce bit-identical
/// results: pointwise kernels write disjoint entries, and reductions sum
/// fixed-size blocks in a fixed order regardless of the thread count.
enum class Exec { serial, parallel, automatic };

inline constexpr std::size_t kBlock = 1024;
/// Grid size from which Exec::automatic goes parallel.
inline constexpr std::size_t kParallelThreshold = 16384;

/// Thread cap from WAVEMAP_THREADS (unset or invalid: OpenMP default).
int thread_cap();

/// Resolves Exec::automatic and falls back to serial inside an enclosing
/// parallel region.
bool run_parallel(Exec exec, std::size_t size);

/// Zeroth-order term of the radial operator, -f(psi)/r^2.
struct Source {
  enum class Kind { linear, sphere, yang_mills, custom };
  Kind kind = Kind::linear;
  /// g'(ell)^2 for the linear flow.
  double k2 = 0.0;
  const Metric* metric = nullptr;

  static Source linear(double slope) { return {Kind::linear, slope * slope, nullptr}; }
  static Source nonlinear(const Metric& metric);

  double f(double psi) const;
};

/// acc_i = psi_rr + psi_r / r - f(psi_i) / r_i^2 for i = 1..size-2 by centered
/// differences; acc[0] and acc[size-1] are set to 0 (boundary nodes).
void acceleration_serial(const Source& src, const double* psi, double* acc, std::size_t size, double dr);
void acceleration_parallel(const Source& src, const double* psi, double* acc, std::size_t size, double dr);
void acceleration(const Source& src, const double* psi, double* acc, std::size_t size, double dr,
                  Exec exec = Exec::automatic);

/// y += a * x over [begin, end).
void axpy(double a, const double* x, double* y, std::size_t begin, std::size_t end, Exec exec = Exec::automatic);

/// Sum of term(i) for i in [begin, end), accumulated per block of kBlock
/// indices and then over blocks in index order.
template <class Term>
double block_sum(std::size_t begin, std::size_t end, Term&& term, Exec exec = Exec::automatic) {
  if (end <= begin) return 0.0;
  const std::size_t count = end - begin;
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  auto run_block = [&](std::size_t b) {
    const std::size_t lo = begin + b * kBlock;
    const std::size_t hi = lo + kBlock < end ? lo + kBlock : end;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  };
  if (run_parallel(exec, count) && blocks > 1) {
    const auto nb = static_cast<long long>(blocks);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long long b = 0; b < nb; ++b) run_block(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace wavemap::kernels
