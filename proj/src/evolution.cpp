#include "wavemap/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wavemap/diagnostics.hpp"
#include "wavemap/error.hpp"

namespace wavemap {

OuterBoundary parse_boundary(const std::string& name) {
  if (name == "fixed") return OuterBoundary::fixed;
  if (name == "absorbing") return OuterBoundary::absorbing;
  throw PreconditionError("unknown outer boundary '" + name + "' (expected fixed or absorbing)");
}

std::string boundary_name(OuterBoundary b) { return b == OuterBoundary::fixed ? "fixed" : "absorbing"; }

namespace {

void check_cfl(const RadialGrid& grid, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("time step must be positive");
  if (dt > kMaxCfl * grid.dr() * (1.0 + 1e-12))
    throw PreconditionError("CFL violation: dt = " + std::to_string(dt) + " exceeds 0.5 dr = " +
                            std::to_string(kMaxCfl * grid.dr()));
}

}  // namespace

Stepper::Stepper(const Metric& metric, RadialField initial, double dt, OuterBoundary boundary, kernels::Exec exec)
    : metric_(metric), field_(std::move(initial)), boundary_(boundary), exec_(exec) {
  source_ = kernels::Source::nonlinear(*metric_);
  init(dt);
}

Stepper::Stepper(double slope, RadialField initial, double dt, OuterBoundary boundary, kernels::Exec exec)
    : source_(kernels::Source::linear(slope)), field_(std::move(initial)), boundary_(boundary), exec_(exec) {
  init(dt);
}

void Stepper::init(double dt) {
  check_cfl(field_.grid, dt);
  dt_ = dt;
  t0_ = field_.time;
  const std::size_t size = field_.grid.size();
  if (field_.psi.size() != size || field_.psi_dot.size() != size)
    throw PreconditionError("field arrays do not match the grid");
  field_.psi[0] = field_.ell0;
  field_.psi_dot[0] = 0.0;
  if (boundary_ == OuterBoundary::fixed) field_.psi_dot[size - 1] = 0.0;
  acc_.assign(size, 0.0);
  psi_prev_.assign(size, 0.0);
  dot_prev_.assign(size, 0.0);
  kernels::acceleration(source_, field_.psi.data(), acc_.data(), size, field_.grid.dr(), exec_);
}

bool Stepper::step() {
  const std::size_t size = field_.grid.size();
  const std::size_t last = size - 1;
  const double dr = field_.grid.dr();
  double* psi = field_.psi.data();
  double* dot = field_.psi_dot.data();
  std::memcpy(psi_prev_.data(), psi, size * sizeof(double));
  std::memcpy(dot_prev_.data(), dot, size * sizeof(double));

  double outer_dot = 0.0;
  if (boundary_ == OuterBoundary::absorbing) {
    const double r = field_.grid.r(last);
    outer_dot = -(psi[last] - psi[last - 1]) / dr - (psi[last] - field_.ell_inf) / (2.0 * r);
  }

  kernels::axpy(0.5 * dt_, acc_.data(), dot, 1, last, exec_);
  kernels::axpy(dt_, dot, psi, 1, last, exec_);
  if (boundary_ == OuterBoundary::absorbing) {
    psi[last] += dt_ * outer_dot;
    dot[last] = outer_dot;
  }
  kernels::acceleration(source_, psi, acc_.data(), size, dr, exec_);
  kernels::axpy(0.5 * dt_, acc_.data(), dot, 1, last, exec_);

  const double bad = kernels::block_sum(
      1, size, [&](std::size_t i) { return std::isfinite(psi[i]) && std::isfinite(dot[i]) ? 0.0 : 1.0; }, exec_);
  if (bad > 0.0) {
    std::memcpy(psi, psi_prev_.data(), size * sizeof(double));
    std::memcpy(dot, dot_prev_.data(), size * sizeof(double));
    return false;
  }
  ++steps_;
  field_.time = t0_ + static_cast<double>(steps_) * dt_;
  return true;
}

RadialField step_nonlinear(const RadialField& field, const Metric& metric, double dt, OuterBoundary boundary) {
  Stepper s(metric, field, dt, boundary, kernels::Exec::automatic);
  if (!s.step()) throw NumericalBlowup("numerical blow-up", field.time);
  return s.state();
}

RadialField step_linear(const RadialField& field, double slope, double dt, OuterBoundary boundary) {
  Stepper s(slope, field, dt, boundary, kernels::Exec::automatic);
  if (!s.step()) throw NumericalBlowup("numerical blow-up", field.time);
  return s.state();
}

double bubble_threshold(const Metric& metric, const VanishingSet& vset, double ell) {
  auto i = vset.find(ell, 1e-6);
  if (!i) return 0.0;
  const double g_ell = eval_G(metric, vset.roots[*i].value);
  double best = 0.0;
  for (auto j : {vset.below(*i), vset.above(*i)}) {
    if (!j) continue;
    const double e = 2.0 * std::abs(eval_G(metric, vset.roots[*j].value) - g_ell);
    if (best == 0.0 || e < best) best = e;
  }
  return best;
}

std::optional<double> concentration_radius(const RadialField& field, const Metric& metric, double threshold) {
  const auto& g = field.grid;
  const double dr = g.dr();
  auto density = [&](std::size_t i) {
    if (i == 0) return 0.0;
    const double r = g.r(i);
    const double gv = metric.g(field.psi[i]);
    return (field.psi_dot[i] * field.psi_dot[i] * r + gv * gv / r) * dr;
  };
  double cum = 0.0;
  double d_lo = density(0);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double d_hi = density(i + 1);
    const double slope = (field.psi[i + 1] - field.psi[i]) / dr;
    const double cell = slope * slope * (g.r(i) + 0.5 * dr) * dr + 0.5 * (d_lo + d_hi);
    if (cum + cell >= threshold) {
      const double w = cell > 0.0 ? (threshold - cum) / cell : 0.0;
      return g.r(i) + w * dr;
    }
    cum += cell;
    d_lo = d_hi;
  }
  return std::nullopt;
}

std::size_t plan_steps(const RadialGrid& grid, double t_final, std::size_t record_every, double cfl) {
  if (!(t_final > 0.0)) throw PreconditionError("t_final must be positive");
  if (record_every == 0) throw PreconditionError("record_every must be at least 1");
  if (!(cfl > 0.0) || cfl > kMaxCfl) throw PreconditionError("cfl must lie in (0, 0.5]");
  const double dt_max = cfl * grid.dr();
  auto steps = static_cast<std::size_t>(std::ceil(t_final / dt_max - 1e-9));
  steps = std::max<std::size_t>(steps, 1);
  steps = (steps + record_every - 1) / record_every * record_every;
  return steps;
}

namespace {

BlowupRecord make_record(const std::vector<std::pair<double, double>>& samples, double detected_at,
                         double last_valid, const std::string& reason) {
  BlowupRecord rec;
  rec.concentration = samples;
  rec.detected_at = detected_at;
  rec.last_valid_time = last_valid;
  rec.reason = reason;
  rec.t_plus = detected_at;
  // Linear extrapolation of rho(t) to zero over the last few samples.
  const std::size_t n = std::min<std::size_t>(5, samples.size());
  if (n >= 2) {
    double st = 0, sr = 0, stt = 0, str = 0;
    for (std::size_t k = samples.size() - n; k < samples.size(); ++k) {
      auto [t, r] = samples[k];
      st += t;
      sr += r;
      stt += t * t;
      str += t * r;
    }
    const double dn = static_cast<double>(n);
    const double den = dn * stt - st * st;
    if (den != 0.0) {
      const double b = (dn * str - st * sr) / den;
      const double a = (sr - b * st) / dn;
      if (b < 0.0) rec.t_plus = std::max(detected_at, -a / b);
    }
  }
  return rec;
}

Trajectory run(Stepper& stepper, const RadialField& initial, double t_final, std::size_t record_every,
               const EvolutionOptions& opts, const Metric* metric, double threshold) {
  const std::size_t steps = plan_steps(initial.grid, t_final, record_every, opts.cfl);
  Trajectory traj;
  traj.dt = stepper.dt();
  traj.record_every = record_every;
  traj.cfl = opts.cfl;
  traj.frames.push_back(stepper.state());

  const bool detect = metric && opts.detect_blowup && threshold > 0.0;
  const std::size_t every = std::max<std::size_t>(1, opts.check_every);
  const double floor_r = opts.floor_cells * initial.grid.dr();
  std::vector<std::pair<double, double>> samples;
  std::optional<double> rho0;

  for (std::size_t k = 1; k <= steps; ++k) {
    if (!stepper.step()) {
      traj.blowup = make_record(samples, stepper.state().time + stepper.dt(), stepper.state().time, "non-finite");
      break;
    }
    if (k % record_every == 0) traj.frames.push_back(stepper.state());
    if (detect && k % every == 0) {
      const auto& st = stepper.state();
      if (auto rho = concentration_radius(st, *metric, threshold)) {
        samples.emplace_back(st.time, *rho);
        if (!rho0) rho0 = *rho;
        if (*rho <= floor_r && *rho < 0.5 * *rho0) {
          traj.blowup = make_record(samples, st.time, st.time, "concentration");
          break;
        }
      }
    }
  }
  return traj;
}

}  // namespace

Trajectory evolve(const RadialField& initial, const Metric& metric, double t_final, std::size_t record_every,
                  const EvolutionOptions& opts) {
  const std::size_t steps = plan_steps(initial.grid, t_final, record_every, opts.cfl);
  const double dt = t_final / static_cast<double>(steps);
  Stepper stepper(metric, initial, dt, opts.boundary, opts.exec);
  double threshold = 0.0;
  if (opts.detect_blowup) {
    const auto vset = find_vanishing_set(metric);
    threshold = opts.concentration_fraction * bubble_threshold(metric, vset, initial.ell0);
  }
  Trajectory traj = run(stepper, initial, t_final, record_every, opts, &metric, threshold);
  traj.flow = "nonlinear";
  traj.metric_id = metric.id();
  return traj;
}

Trajectory evolve_linear(const RadialField& initial, double slope, double t_final, std::size_t record_every,
                         const EvolutionOptions& opts) {
  const std::size_t steps = plan_steps(initial.grid, t_final, record_every, opts.cfl);
  const double dt = t_final / static_cast<double>(steps);
  Stepper stepper(slope, initial, dt, opts.boundary, opts.exec);
  Trajectory traj = run(stepper, initial, t_final, record_every, opts, nullptr, 0.0);
  traj.flow = "linear";
  traj.linear_slope = std::abs(slope);
  return traj;
}

TransformedField transform_T(const RadialField& field, double ell, double slope) {
  const double ka = std::abs(slope);
  const double kr = std::round(ka);
  if (kr < 1.0 || std::abs(ka - kr) > 1e-9)
    throw DomainError("transform T needs a nonzero integer slope g'(ell), got " + std::to_string(slope));
  const int k = static_cast<int>(kr);
  const auto& g = field.grid;
  TransformedField out;
  out.k = k;
  out.weight_exponent = 1.0 + 2.0 * k;
  out.r.resize(g.size());
  out.values.resize(g.size());
  for (std::size_t i = 1; i < g.size(); ++i) {
    out.r[i] = g.r(i);
    out.values[i] = (field.psi[i] - ell) / std::pow(g.r(i), k);
  }
  double near = 0.0;
  for (std::size_t i = 2; i <= std::min<std::size_t>(8, g.n()); ++i) near = std::max(near, std::abs(out.values[i]));
  if (std::abs(out.values[1]) > 1.5 * near && std::abs(out.values[1]) > 1e-300)
    throw DomainError("field not in the image domain of T: phi / r^" + std::to_string(k) +
                      " diverges at the origin");
  out.values[0] = 2.0 * out.values[1] - out.values[2];
  return out;
}

double weighted_norm_sq(const TransformedField& t) {
  const std::size_t size = t.values.size();
  if (size < 2) return 0.0;
  const double dr = t.r[1];
  return kernels::block_sum(0, size - 1, [&](std::size_t i) {
    const double rm = (static_cast<double>(i) + 0.5) * dr;
    const double d = (t.values[i + 1] - t.values[i]) / dr;
    return d * d * std::pow(rm, t.weight_exponent) * dr;
  });
}

}  // namespace wavemap
