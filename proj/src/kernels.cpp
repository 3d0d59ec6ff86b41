#include "wavemap/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace wavemap::kernels {

int thread_cap() {
  static const int cap = [] {
    int def = omp_get_max_threads();
    if (const char* env = std::getenv("WAVEMAP_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) return static_cast<int>(std::min<long>(v, def));
    }
    return def;
  }();
  return cap;
}

bool run_parallel(Exec exec, std::size_t size) {
  if (exec == Exec::serial || omp_in_parallel() || thread_cap() <= 1) return false;
  if (exec == Exec::parallel) return true;
  return size >= kParallelThreshold;
}

Source Source::nonlinear(const Metric& metric) {
  Source s;
  s.metric = &metric;
  switch (metric.kind()) {
    case Metric::Kind::sphere: s.kind = Kind::sphere; break;
    case Metric::Kind::yang_mills: s.kind = Kind::yang_mills; break;
    case Metric::Kind::custom: s.kind = Kind::custom; break;
  }
  return s;
}

double Source::f(double psi) const {
  switch (kind) {
    case Kind::linear: return k2 * psi;
    case Kind::sphere: return std::sin(psi) * std::cos(psi);
    case Kind::yang_mills: return -2.0 * psi * (1.0 - psi * psi);
    case Kind::custom: return metric->f(psi);
  }
  return 0.0;
}

namespace {

template <Source::Kind K>
inline double source_term(const Source& src, double psi) {
  if constexpr (K == Source::Kind::linear) return src.k2 * psi;
  else if constexpr (K == Source::Kind::sphere) return std::sin(psi) * std::cos(psi);
  else if constexpr (K == Source::Kind::yang_mills) return -2.0 * psi * (1.0 - psi * psi);
  else return src.metric->f(psi);
}

template <Source::Kind K>
inline void accel_range(const Source& src, const double* psi, double* acc, std::size_t lo, std::size_t hi,
                        double dr) {
  const double inv_dr2 = 1.0 / (dr * dr);
  for (std::size_t i = lo; i < hi; ++i) {
    const double ri = static_cast<double>(i);
    const double lap = (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) + (psi[i + 1] - psi[i - 1]) / (2.0 * ri);
    acc[i] = inv_dr2 * (lap - source_term<K>(src, psi[i]) / (ri * ri));
  }
}

template <Source::Kind K>
void accel_dispatch(const Source& src, const double* psi, double* acc, std::size_t size, double dr, bool par) {
  const std::size_t last = size - 1;
  if (par) {
    const auto n = static_cast<long long>(last);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long long i = 1; i < n; ++i)
      accel_range<K>(src, psi, acc, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, dr);
  } else {
    accel_range<K>(src, psi, acc, 1, last, dr);
  }
  acc[0] = 0.0;
  acc[last] = 0.0;
}

void accel(const Source& src, const double* psi, double* acc, std::size_t size, double dr, bool par) {
  switch (src.kind) {
    case Source::Kind::linear: accel_dispatch<Source::Kind::linear>(src, psi, acc, size, dr, par); break;
    case Source::Kind::sphere: accel_dispatch<Source::Kind::sphere>(src, psi, acc, size, dr, par); break;
    case Source::Kind::yang_mills: accel_dispatch<Source::Kind::yang_mills>(src, psi, acc, size, dr, par); break;
    case Source::Kind::custom: accel_dispatch<Source::Kind::custom>(src, psi, acc, size, dr, par); break;
  }
}

}  // namespace

void acceleration_serial(const Source& src, const double* psi, double* acc, std::size_t size, double dr) {
  accel(src, psi, acc, size, dr, false);
}

void acceleration_parallel(const Source& src, const double* psi, double* acc, std::size_t size, double dr) {
  accel(src, psi, acc, size, dr, !omp_in_parallel());
}

void acceleration(const Source& src, const double* psi, double* acc, std::size_t size, double dr, Exec exec) {
  accel(src, psi, acc, size, dr, run_parallel(exec, size));
}

void axpy(double a, const double* x, double* y, std::size_t begin, std::size_t end, Exec exec) {
  if (run_parallel(exec, end - begin)) {
    const auto lo = static_cast<long long>(begin), hi = static_cast<long long>(end);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long long i = lo; i < hi; ++i) y[i] += a * x[i];
  } else {
    for (std::size_t i = begin; i < end; ++i) y[i] += a * x[i];
  }
}

}  // namespace wavemap::kernels
