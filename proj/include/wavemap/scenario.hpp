#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "wavemap/data.hpp"
#include "wavemap/evolution.hpp"
#include "wavemap/io.hpp"

namespace wavemap {

/// One connector in a planted tower: Q(0) = inner, Q(inf) = outer, scale lambda.
struct PlantedSpec {
  double inner = 0.0;
  double outer = 0.0;
  double lambda = 1.0;
};

struct DataSpec {
  /// bump | superposition | random_bumps | bubble | planted | collapsing | snapshot
  std::string family = "bump";
  double ell = 0.0;
  std::vector<Bump> bumps;
  std::size_t count = 3;
  double center_lo = 5.0, center_hi = 40.0;
  double width_lo = 2.0, width_hi = 5.0;
  double amplitude = 0.1;
  /// bubble / collapsing
  double inner = 0.0, outer = 0.0, lambda = 1.0, kappa = 0.0, cutoff = 3.0;
  std::vector<PlantedSpec> planted;
  std::filesystem::path snapshot;
  std::uint64_t seed = 20240601;
};

struct PipelineSpec {
  /// Subset of: scattering, bubbles, regular_part, select_times.
  std::vector<std::string> stages;
  /// Self-similar cone parameters for the series.
  double lambda = 0.5;
  double A = 2.0;
  /// Outer limit for bubble extraction (0: half of r_max).
  double R = 0.0;
  double separation = 0.2;
  double misfit_fraction = 0.1;
  /// Heuristic energy threshold of the exterior equivalence check (NaN: delta^2 / 4).
  double delta_prime = std::numeric_limits<double>::quiet_NaN();
  std::size_t select_count = 5;
};

struct Scenario {
  MetricSpec metric;
  /// nonlinear | linear
  std::string flow = "nonlinear";
  /// Linear potential slope; NaN selects |g'(ell)|.
  double slope = std::numeric_limits<double>::quiet_NaN();
  DataSpec data;
  double r_max = 40.0;
  std::size_t n_points = 4096;
  double t_final = 10.0;
  double cfl = kMaxCfl;
  /// Explicit step (0: derived from cfl).
  double dt = 0.0;
  std::size_t record_every = 10;
  OuterBoundary boundary = OuterBoundary::fixed;
  bool detect_blowup = true;
  PipelineSpec pipeline;
  std::filesystem::path output_dir = "out";
  bool write_frames = true;
};

/// Line-oriented "key = value" text with sections [metric] [data] [grid]
/// [time] [pipeline] [output]; '#' starts a comment. Errors carry the
/// line number. Relative snapshot paths resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Checks roots against the vanishing set and the eight-points-per-scale rule.
void validate_scenario(const Scenario& sc, const Metric& metric);

/// Initial data of the scenario on its grid.
RadialField build_initial_data(const Scenario& sc, const Metric& metric);

struct RunResult {
  /// ok | truncated | error
  std::string status = "ok";
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  int exit_code() const { return errors.empty() ? 0 : 1; }
};

/// Simulates, writes frames / series.csv / meta.txt and the pipeline reports
/// into `out_dir`, and summarizes the run in report.txt.
RunResult run_scenario(const Scenario& sc, const std::filesystem::path& out_dir);

/// Series rows with the relative energy drift column filled in.
std::vector<SeriesRow> series_with_drift(const Trajectory& traj, const EnergyModel& model, double slope,
                                         double lambda, double A);

}  // namespace wavemap
