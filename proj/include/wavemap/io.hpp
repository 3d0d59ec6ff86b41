#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wavemap/diagnostics.hpp"
#include "wavemap/field.hpp"
#include "wavemap/geometry.hpp"
#include "wavemap/resolution.hpp"

namespace wavemap {

/// Enough to rebuild the metric of a stored run.
struct MetricSpec {
  std::string name = "sphere";
  std::string g;
  std::string g_prime;
  Interval window{0.0, 0.0};
  bool has_window = false;

  static MetricSpec of(const Metric& m);
  Metric build() const;
};

struct Snapshot {
  RadialField field;
  std::string metric_id;
};

/// "%.17g" rendering; the round trip through strtod is exact.
std::string format_double(double x);

/// Header "# wavemap-snapshot v1", "# metric <id>", "# ell0 <v> ell_inf <v>",
/// "# t <stamp>", then one "r psi psi_dot" row per node.
std::string format_snapshot(const RadialField& field, const std::string& metric_id);
Snapshot parse_snapshot(const std::string& text);
void write_snapshot(const std::filesystem::path& path, const RadialField& field, const std::string& metric_id);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Columns t, E_total, E_kin, E_grad, E_pot, E_selfsim, sup_out_cone,
/// Hl_fraction, kin_fraction, E_drift; NaN renders as "nan".
std::string format_series(const std::vector<SeriesRow>& rows);
std::vector<SeriesRow> parse_series(const std::string& text);

/// Writes frame_NNNNN.snap per frame, meta.txt and (if rows are given) series.csv.
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const MetricSpec& metric,
                      const std::vector<SeriesRow>& rows = {});
struct StoredTrajectory {
  Trajectory traj;
  MetricSpec metric;
};
/// Throws PreconditionError when the directory or its meta.txt is missing.
StoredTrajectory read_trajectory(const std::filesystem::path& dir);

/// Key-value text, one "key value" per line; nested records use dotted keys.
std::string format_bubble_report(const BubbleReport& report);
std::string format_pythagorean(const PythagoreanLedger& ledger);
std::string format_scattering(const ScatteringState& state);
std::string format_regular_part(const RegularPart& part);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace wavemap
