#include "wavemap/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <tuple>

#include "wavemap/error.hpp"
#include "wavemap/expression.hpp"
#include "wavemap/resolution.hpp"

namespace wavemap {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Numbers may be written as constant expressions ("pi", "2*pi", "1e-3").
double number(const std::string& v, int line) {
  try {
    return Expression::parse(v)(0.0);
  } catch (const Error& e) {
    throw ParseError("bad number '" + v + "': " + e.what(), line);
  }
}

std::size_t count_value(const std::string& v, int line) {
  const double x = number(v, line);
  if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) throw ParseError("expected a nonnegative integer, got '" + v + "'", line);
  return static_cast<std::size_t>(x);
}

bool boolean(const std::string& v, int line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ParseError("expected true or false, got '" + v + "'", line);
}

std::pair<double, double> range(const std::string& v, int line) {
  auto parts = split_list(v, ',');
  if (parts.size() != 2) throw ParseError("expected 'lo, hi', got '" + v + "'", line);
  return {number(parts[0], line), number(parts[1], line)};
}

// "a b c; a b c" triples.
std::vector<std::array<double, 3>> triples(const std::string& v, int line) {
  std::vector<std::array<double, 3>> out;
  for (const auto& item : split_list(v, ';')) {
    std::istringstream is(item);
    std::array<double, 3> t{};
    std::string a, b, c, extra;
    if (!(is >> a >> b >> c) || (is >> extra)) throw ParseError("expected three numbers in '" + item + "'", line);
    t = {number(a, line), number(b, line), number(c, line)};
    out.push_back(t);
  }
  return out;
}

double smallest_scale(const Scenario& sc) {
  const auto& d = sc.data;
  double s = std::numeric_limits<double>::infinity();
  if (d.family == "bump" || d.family == "superposition")
    for (const auto& b : d.bumps) s = std::min(s, b.width);
  if (d.family == "random_bumps") s = d.width_lo;
  if (d.family == "bubble" || d.family == "collapsing") s = d.lambda;
  if (d.family == "planted")
    for (const auto& p : d.planted) s = std::min(s, p.lambda);
  return s;
}

void require_pair(const VanishingSet& vset, double inner, double outer) {
  auto i = vset.find(inner), j = vset.find(outer);
  if (!i || !j) throw PreconditionError("bubble endpoints " + std::to_string(inner) + ", " + std::to_string(outer) +
                                        " are not roots in the metric's vanishing set");
  if (std::max(*i, *j) != std::min(*i, *j) + 1)
    throw PreconditionError("bubble endpoints are not consecutive roots");
}

double root_value(const VanishingSet& vset, double x) { return vset.roots[*vset.find(x)].value; }

}  // namespace

Scenario parse_scenario(const std::string& text, const fs::path& base_dir) {
  Scenario sc;
  Bump single;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const auto c = s.find('#');
    if (c != std::string::npos) s = s.substr(0, c);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      static const std::vector<std::string> known = {"metric", "data", "grid", "time", "pipeline", "output"};
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ParseError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (section.empty()) throw ParseError("key '" + key + "' outside a section", line);
    auto unknown = [&]() { throw ParseError("unknown key '" + key + "' in [" + section + "]", line); };

    if (section == "metric") {
      if (key == "name") sc.metric.name = val;
      else if (key == "g") sc.metric.g = val;
      else if (key == "g_prime") sc.metric.g_prime = val;
      else if (key == "window") {
        auto [lo, hi] = range(val, line);
        sc.metric.window = {lo, hi};
        sc.metric.has_window = true;
      } else if (key == "flow") {
        if (val != "nonlinear" && val != "linear") throw ParseError("flow must be nonlinear or linear", line);
        sc.flow = val;
      } else if (key == "slope") sc.slope = number(val, line);
      else unknown();
    } else if (section == "data") {
      auto& d = sc.data;
      if (key == "family") d.family = val;
      else if (key == "ell") d.ell = number(val, line);
      else if (key == "amplitude") { d.amplitude = single.amplitude = number(val, line); }
      else if (key == "center") { single.center = number(val, line); }
      else if (key == "width") { single.width = number(val, line); }
      else if (key == "bumps") {
        for (auto t : triples(val, line)) d.bumps.push_back({t[0], t[1], t[2]});
      } else if (key == "count") d.count = count_value(val, line);
      else if (key == "centers") std::tie(d.center_lo, d.center_hi) = range(val, line);
      else if (key == "widths") std::tie(d.width_lo, d.width_hi) = range(val, line);
      else if (key == "inner") d.inner = number(val, line);
      else if (key == "outer") d.outer = number(val, line);
      else if (key == "lambda") d.lambda = number(val, line);
      else if (key == "kappa") d.kappa = number(val, line);
      else if (key == "cutoff") d.cutoff = number(val, line);
      else if (key == "planted") {
        for (auto t : triples(val, line)) d.planted.push_back({t[0], t[1], t[2]});
      } else if (key == "snapshot") d.snapshot = base_dir / val;
      else if (key == "seed") d.seed = static_cast<std::uint64_t>(count_value(val, line));
      else unknown();
    } else if (section == "grid") {
      if (key == "r_max") sc.r_max = number(val, line);
      else if (key == "n_points") sc.n_points = count_value(val, line);
      else unknown();
    } else if (section == "time") {
      if (key == "t_final") sc.t_final = number(val, line);
      else if (key == "cfl") sc.cfl = number(val, line);
      else if (key == "dt") sc.dt = number(val, line);
      else if (key == "record_every") sc.record_every = count_value(val, line);
      else if (key == "boundary") {
        try {
          sc.boundary = parse_boundary(val);
        } catch (const Error& e) {
          throw ParseError(e.what(), line);
        }
      } else if (key == "detect_blowup") sc.detect_blowup = boolean(val, line);
      else unknown();
    } else if (section == "pipeline") {
      auto& p = sc.pipeline;
      if (key == "stages") {
        static const std::vector<std::string> known = {"scattering", "bubbles", "regular_part", "select_times"};
        p.stages = split_list(val, ',');
        for (const auto& st : p.stages)
          if (std::find(known.begin(), known.end(), st) == known.end())
            throw ParseError("unknown pipeline stage '" + st + "'", line);
      } else if (key == "lambda") p.lambda = number(val, line);
      else if (key == "A") p.A = number(val, line);
      else if (key == "R") p.R = number(val, line);
      else if (key == "separation") p.separation = number(val, line);
      else if (key == "misfit") p.misfit_fraction = number(val, line);
      else if (key == "delta_prime") p.delta_prime = number(val, line);
      else if (key == "select_count") p.select_count = count_value(val, line);
      else unknown();
    } else if (section == "output") {
      if (key == "dir") sc.output_dir = val;
      else if (key == "frames") sc.write_frames = boolean(val, line);
      else unknown();
    }
  }
  if (sc.data.family == "bump" && sc.data.bumps.empty()) sc.data.bumps.push_back(single);
  static const std::vector<std::string> families = {"bump",    "superposition", "random_bumps", "bubble",
                                                    "planted", "collapsing",    "snapshot"};
  if (std::find(families.begin(), families.end(), sc.data.family) == families.end())
    throw ParseError("unknown data family '" + sc.data.family + "'");
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  return parse_scenario(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path{});
}

void validate_scenario(const Scenario& sc, const Metric& metric) {
  if (sc.data.family != "snapshot") {
    if (sc.n_points < RadialGrid::kMinPoints)
      throw PreconditionError("n_points = " + std::to_string(sc.n_points) + " is below the grid floor of " +
                              std::to_string(RadialGrid::kMinPoints));
    if (!(sc.r_max > 0.0)) throw PreconditionError("r_max must be positive");
  }
  if (!(sc.t_final > 0.0)) throw PreconditionError("t_final must be positive");
  if (sc.record_every == 0) throw PreconditionError("record_every must be at least 1");
  if (!(sc.cfl > 0.0 && sc.cfl <= kMaxCfl)) throw PreconditionError("cfl must lie in (0, 0.5]");

  const double dr = sc.r_max / static_cast<double>(sc.n_points);
  const double scale = smallest_scale(sc);
  if (sc.data.family != "snapshot" && std::isfinite(scale) && scale < 8.0 * dr)
    throw PreconditionError("under-resolved: smallest scale " + std::to_string(scale) + " has fewer than 8 points (dr = " +
                            std::to_string(dr) + ")");
  if (sc.dt > 0.0 && sc.dt > kMaxCfl * dr * (1.0 + 1e-12))
    throw PreconditionError("dt exceeds the CFL limit 0.5 dr");

  if (sc.flow == "linear") return;
  const auto vset = find_vanishing_set(metric);
  const auto& d = sc.data;
  if (d.family == "bump" || d.family == "superposition" || d.family == "random_bumps") {
    if (!vset.find(d.ell)) throw PreconditionError("ell = " + std::to_string(d.ell) + " is not a root of g");
  } else if (d.family == "bubble" || d.family == "collapsing") {
    require_pair(vset, d.inner, d.outer);
  } else if (d.family == "planted") {
    if (d.planted.empty()) throw PreconditionError("planted family needs at least one bubble");
    for (std::size_t j = 0; j < d.planted.size(); ++j) {
      require_pair(vset, d.planted[j].inner, d.planted[j].outer);
      if (j > 0 && std::abs(d.planted[j].outer - d.planted[j - 1].inner) > 1e-9)
        throw PreconditionError("planted bubbles must chain: outer of bubble " + std::to_string(j + 1) +
                                " differs from inner of bubble " + std::to_string(j));
    }
  }
}

RadialField build_initial_data(const Scenario& sc, const Metric& metric) {
  const auto& d = sc.data;
  if (d.family == "snapshot") return read_snapshot(d.snapshot).field;
  const RadialGrid grid(sc.r_max, sc.n_points);
  if (d.family == "bump" || d.family == "superposition") return bump_data(grid, d.ell, d.bumps);
  if (d.family == "random_bumps") {
    Xorshift64Star rng(d.seed);
    return bump_data(grid, d.ell,
                     random_bumps(rng, d.count, d.center_lo, d.center_hi, d.width_lo, d.width_hi, d.amplitude));
  }
  const auto vset = find_vanishing_set(metric);
  if (d.family == "bubble" || d.family == "collapsing") {
    const auto q = build_connector(metric, vset, root_value(vset, d.inner), root_value(vset, d.outer));
    if (d.family == "bubble") return rescale_Q(q, d.lambda, grid);
    return collapsing_bubble(grid, q, d.lambda, d.kappa, d.cutoff);
  }
  std::vector<PlantedBubble> bubbles;
  for (const auto& p : d.planted)
    bubbles.push_back({build_connector(metric, vset, root_value(vset, p.inner), root_value(vset, p.outer)), p.lambda});
  return planted_bubbles(grid, bubbles.front().map.m(), bubbles);
}

std::vector<SeriesRow> series_with_drift(const Trajectory& traj, const EnergyModel& model, double slope,
                                         double lambda, double A) {
  auto rows = compute_series(traj, model, slope, lambda, A);
  if (rows.empty()) return rows;
  const double e0 = rows.front().E_total;
  for (auto& r : rows) r.E_drift = e0 != 0.0 ? (r.E_total - e0) / e0 : r.E_total - e0;
  return rows;
}

RunResult run_scenario(const Scenario& sc, const fs::path& out_dir) {
  RunResult res;
  const Metric metric = sc.metric.build();
  validate_scenario(sc, metric);
  const RadialField init = build_initial_data(sc, metric);
  const bool linear = sc.flow == "linear";
  const double ell = init.ell_inf;
  const double slope = std::isnan(sc.slope) ? std::abs(metric.g_prime(ell)) : std::abs(sc.slope);

  EvolutionOptions opts;
  opts.cfl = sc.dt > 0.0 ? sc.dt / init.grid.dr() : sc.cfl;
  opts.boundary = sc.boundary;
  opts.detect_blowup = sc.detect_blowup && !linear;

  Trajectory traj = linear ? evolve_linear(init, slope, sc.t_final, sc.record_every, opts)
                           : evolve(init, metric, sc.t_final, sc.record_every, opts);
  if (linear) traj.metric_id = "linear";
  if (traj.blowup) res.status = "truncated";

  const EnergyModel model = linear ? EnergyModel::linear(slope) : EnergyModel::of(metric);
  const auto rows = series_with_drift(traj, model, slope, sc.pipeline.lambda, sc.pipeline.A);
  fs::create_directories(out_dir);
  if (sc.write_frames) write_trajectory(out_dir, traj, MetricSpec::of(metric), rows);
  else write_text(out_dir / "series.csv", format_series(rows));

  auto has = [&](const char* stage) {
    return std::find(sc.pipeline.stages.begin(), sc.pipeline.stages.end(), stage) != sc.pipeline.stages.end();
  };
  auto guarded = [&](const char* stage, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      res.errors.push_back(std::string(stage) + ": " + e.what());
    }
  };

  std::vector<double> selected;
  if (has("select_times")) {
    guarded("select_times", [&] {
      const auto rule = traj.blowup ? ConeRule::blowup : ConeRule::global;
      const double tp = traj.blowup ? traj.blowup->t_plus : 0.0;
      const auto sel = select_times(traj, sc.pipeline.select_count, rule, tp);
      std::string text = "# t criterion\n";
      for (std::size_t k = 0; k < sel.times.size(); ++k)
        text += format_double(sel.times[k]) + " " + format_double(sel.criterion[k]) + "\n";
      write_text(out_dir / "selected_times.txt", text);
      selected = sel.times;
    });
  }
  if (has("scattering")) {
    if (traj.blowup) {
      res.warnings.push_back("scattering: skipped, the run blew up");
    } else {
      guarded("scattering", [&] {
        const auto st = linear ? build_scattering_state_linear(traj, opts) : build_scattering_state(traj, metric, opts);
        write_text(out_dir / "scattering.txt", format_scattering(st));
        write_snapshot(out_dir / "scattering_phi_L.snap", st.phi_L, "linear");
      });
    }
  }
  if (has("bubbles")) {
    guarded("bubbles", [&] {
      if (linear) throw PreconditionError("bubble extraction needs the nonlinear flow");
      const auto& fr = traj.frames.back();
      const double R = sc.pipeline.R > 0.0 ? sc.pipeline.R : 0.5 * fr.grid.r_max();
      ExtractionOptions eo;
      eo.separation = sc.pipeline.separation;
      eo.misfit_fraction = sc.pipeline.misfit_fraction;
      const auto rep = extract_bubbles(fr, metric, R, eo);
      const auto led = pythagorean_report(rep, metric);
      // Energy / H equivalence of the exterior [R, r_max] around the outer root.
      const auto rc = root_constants(metric, rep.ell, sc.pipeline.delta_prime);
      const auto eq = energy_h_equivalence(fr, metric, rc, R, fr.grid.r_max());
      std::string text;
      auto line = [&](const char* key, double v) { text += std::string("equivalence.") + key + " " + format_double(v) + "\n"; };
      auto flag = [&](const char* key, bool v) { text += std::string("equivalence.") + key + (v ? " true\n" : " false\n"); };
      line("ell", rc.ell);
      line("delta", rc.delta);
      line("C", rc.C);
      line("delta_prime", rc.delta_prime);
      flag("delta_prime_heuristic", true);
      line("sup_dev", eq.sup_dev);
      line("energy", eq.energy);
      line("h_sq", eq.h_sq);
      flag("sup_hypothesis", eq.sup_hypothesis);
      flag("energy_hypothesis", eq.energy_hypothesis);
      flag("ok", eq.ok);
      if (eq.delta_prime_violated)
        res.warnings.push_back("bubbles: delta_prime admits an exterior with sup|psi - ell| > delta");
      write_text(out_dir / "bubbles.txt", format_bubble_report(rep) + format_pythagorean(led) + text);
      write_snapshot(out_dir / "residual.snap", rep.residual, metric.id());
      for (const auto& e : rep.errors) res.errors.push_back("bubbles: " + e);
      for (const auto& w : rep.warnings) res.warnings.push_back("bubbles: " + w);
      // Residual b_n along the selected times t_n, reported as a trend only.
      if (!selected.empty()) {
        std::string trend = "# n t J b_hxl2\n";
        for (std::size_t n = 0; n < selected.size(); ++n) {
          const auto& fn = traj.frames[traj.nearest_frame(selected[n])];
          std::string row = std::to_string(n) + " " + format_double(fn.time);
          try {
            const auto rn = extract_bubbles(fn, metric, R, eo);
            row += " " + std::to_string(rn.J) + " " + format_double(residual_norms(rn).hxl2);
          } catch (const Error& e) {
            row += " nan nan  # " + std::string(e.what());
          }
          trend += row + "\n";
        }
        write_text(out_dir / "residual_trend.txt", trend);
      }
    });
  }
  if (has("regular_part")) {
    if (!traj.blowup) {
      res.warnings.push_back("regular_part: skipped, no blow-up detected");
    } else {
      guarded("regular_part", [&] {
        const auto rp = extract_regular_part(traj, metric, opts);
        write_text(out_dir / "regular_part.txt", format_regular_part(rp));
      });
    }
  }

  if (!res.errors.empty()) res.status = "error";
  double max_drift = 0.0;
  for (const auto& r : rows) max_drift = std::max(max_drift, std::abs(r.E_drift));
  std::ostringstream rep;
  rep << "status " << res.status << '\n';
  rep << "metric " << metric.id() << '\n';
  rep << "flow " << sc.flow << '\n';
  rep << "dt " << format_double(traj.dt) << '\n';
  rep << "frames " << traj.frames.size() << '\n';
  rep << "t_end " << format_double(traj.end_time()) << '\n';
  rep << "max_abs_energy_drift " << format_double(max_drift) << '\n';
  if (traj.blowup) {
    rep << "blowup.t_plus " << format_double(traj.blowup->t_plus) << '\n';
    rep << "blowup.detected_at " << format_double(traj.blowup->detected_at) << '\n';
    rep << "blowup.reason " << traj.blowup->reason << '\n';
  }
  for (std::size_t k = 0; k < res.errors.size(); ++k) rep << "error." << k + 1 << ' ' << res.errors[k] << '\n';
  for (std::size_t k = 0; k < res.warnings.size(); ++k) rep << "warning." << k + 1 << ' ' << res.warnings[k] << '\n';
  write_text(out_dir / "report.txt", rep.str());
  return res;
}

}  // namespace wavemap
