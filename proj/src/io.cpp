#include "wavemap/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "wavemap/error.hpp"

namespace wavemap {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSnapshotMagic = "# wavemap-snapshot v1";
constexpr const char* kSeriesHeader =
    "t,E_total,E_kin,E_grad,E_pot,E_selfsim,sup_out_cone,Hl_fraction,kin_fraction,E_drift";

double parse_double(const std::string& tok, int line) {
  if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw ParseError("expected a number, got '" + tok + "'", line);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.snap", k);
  return buf;
}

// Key-value lines "key value..." with '#' comments.
std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) kv[line] = "";
    else kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  return kv;
}

class KvWriter {
public:
  void put(const std::string& key, double v) { os_ << key << ' ' << format_double(v) << '\n'; }
  void put(const std::string& key, std::size_t v) { os_ << key << ' ' << v << '\n'; }
  void put(const std::string& key, int v) { os_ << key << ' ' << v << '\n'; }
  void put(const std::string& key, bool v) { os_ << key << ' ' << (v ? "true" : "false") << '\n'; }
  void put(const std::string& key, const std::string& v) { os_ << key << ' ' << v << '\n'; }
  void put(const std::string& key, const char* v) { put(key, std::string(v)); }
  std::string str() const { return os_.str(); }

private:
  std::ostringstream os_;
};

}  // namespace

MetricSpec MetricSpec::of(const Metric& m) {
  MetricSpec s;
  s.name = m.id();
  s.g = m.g_source();
  s.g_prime = m.g_prime_source();
  s.window = m.search_window();
  s.has_window = true;
  return s;
}

Metric MetricSpec::build() const {
  if (name == "custom") {
    if (g.empty() || g_prime.empty()) throw ParseError("custom metric needs g and g_prime expressions");
    if (!has_window) throw ParseError("custom metric needs a search window");
    return Metric::custom(g, g_prime, window);
  }
  Metric m = Metric::by_name(name);
  return has_window ? m.with_window(window) : m;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_snapshot(const RadialField& field, const std::string& metric_id) {
  std::string out;
  out.reserve(field.psi.size() * 72 + 128);
  out += kSnapshotMagic;
  out += "\n# metric " + metric_id + "\n";
  out += "# ell0 " + format_double(field.ell0) + " ell_inf " + format_double(field.ell_inf) + "\n";
  out += "# t " + format_double(field.time) + "\n";
  for (std::size_t i = 0; i < field.psi.size(); ++i) {
    out += format_double(field.grid.r(i));
    out += ' ';
    out += format_double(field.psi[i]);
    out += ' ';
    out += format_double(field.psi_dot[i]);
    out += '\n';
  }
  return out;
}

Snapshot parse_snapshot(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++lineno;
    return true;
  };
  if (!next() || line != kSnapshotMagic) throw ParseError("missing snapshot header", 1);
  Snapshot snap;
  double ell0 = 0.0, ell_inf = 0.0, t = 0.0;
  bool have_metric = false, have_ell = false, have_t = false;
  std::vector<double> r, psi, dot;
  while (next()) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "metric") {
        hs >> snap.metric_id;
        have_metric = true;
      } else if (key == "ell0") {
        std::string a, tag, b;
        hs >> a >> tag >> b;
        if (tag != "ell_inf") throw ParseError("malformed ell0 header", lineno);
        ell0 = parse_double(a, lineno);
        ell_inf = parse_double(b, lineno);
        have_ell = true;
      } else if (key == "t") {
        std::string a;
        hs >> a;
        t = parse_double(a, lineno);
        have_t = true;
      }
      continue;
    }
    std::istringstream rs(line);
    std::string a, b, c, extra;
    if (!(rs >> a >> b >> c) || (rs >> extra)) throw ParseError("expected 'r psi psi_dot'", lineno);
    r.push_back(parse_double(a, lineno));
    psi.push_back(parse_double(b, lineno));
    dot.push_back(parse_double(c, lineno));
  }
  if (!have_metric || !have_ell || !have_t) throw ParseError("incomplete snapshot header");
  if (r.size() < 2) throw ParseError("snapshot has fewer than two rows");
  if (r[0] != 0.0) throw ParseError("first snapshot row must be at r = 0");
  const auto grid = RadialGrid::from_spacing(r[1], r.size() - 1);
  snap.field = RadialField(grid, ell0, ell_inf, t);
  snap.field.psi = std::move(psi);
  snap.field.psi_dot = std::move(dot);
  return snap;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PreconditionError("cannot write " + path.string());
  os << text;
  if (!os) throw PreconditionError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PreconditionError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_snapshot(const fs::path& path, const RadialField& field, const std::string& metric_id) {
  write_text(path, format_snapshot(field, metric_id));
}

Snapshot read_snapshot(const fs::path& path) { return parse_snapshot(read_text(path)); }

std::string format_series(const std::vector<SeriesRow>& rows) {
  std::string out = kSeriesHeader;
  out += '\n';
  for (const auto& r : rows) {
    const double cols[] = {r.t,        r.E_total,      r.E_kin,       r.E_grad,       r.E_pot,
                           r.E_selfsim, r.sup_out_cone, r.Hl_fraction, r.kin_fraction, r.E_drift};
    for (std::size_t k = 0; k < std::size(cols); ++k) {
      if (k) out += ',';
      out += format_double(cols[k]);
    }
    out += '\n';
  }
  return out;
}

std::vector<SeriesRow> parse_series(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kSeriesHeader) throw ParseError("unexpected series.csv header", 1);
  std::vector<SeriesRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tok = split(line, ',');
    if (tok.size() != 10) throw ParseError("expected 10 columns", lineno);
    SeriesRow r;
    double* dst[] = {&r.t,        &r.E_total,      &r.E_kin,       &r.E_grad,       &r.E_pot,
                     &r.E_selfsim, &r.sup_out_cone, &r.Hl_fraction, &r.kin_fraction, &r.E_drift};
    for (std::size_t k = 0; k < 10; ++k) *dst[k] = parse_double(tok[k], lineno);
    rows.push_back(r);
  }
  return rows;
}

void write_trajectory(const fs::path& dir, const Trajectory& traj, const MetricSpec& metric,
                      const std::vector<SeriesRow>& rows) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < traj.frames.size(); ++k)
    write_snapshot(dir / frame_name(k), traj.frames[k], traj.metric_id);
  KvWriter kv;
  kv.put("scheme", traj.scheme);
  kv.put("flow", traj.flow);
  kv.put("metric", metric.name);
  if (!metric.g.empty()) kv.put("metric_g", metric.g);
  if (!metric.g_prime.empty()) kv.put("metric_g_prime", metric.g_prime);
  if (metric.has_window) {
    kv.put("window_lo", metric.window.lo);
    kv.put("window_hi", metric.window.hi);
  }
  kv.put("metric_id", traj.metric_id);
  kv.put("dt", traj.dt);
  kv.put("record_every", traj.record_every);
  kv.put("cfl", traj.cfl);
  kv.put("linear_slope", traj.linear_slope);
  kv.put("frames", traj.frames.size());
  kv.put("blowup", traj.blowup.has_value());
  if (traj.blowup) {
    const auto& b = *traj.blowup;
    kv.put("t_plus", b.t_plus);
    kv.put("detected_at", b.detected_at);
    kv.put("last_valid_time", b.last_valid_time);
    kv.put("reason", b.reason);
    std::string conc;
    for (const auto& [t, rho] : b.concentration) conc += format_double(t) + ":" + format_double(rho) + ";";
    kv.put("concentration", conc);
  }
  write_text(dir / "meta.txt", kv.str());
  if (!rows.empty()) write_text(dir / "series.csv", format_series(rows));
}

StoredTrajectory read_trajectory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw PreconditionError("trajectory directory not found: " + dir.string());
  if (!fs::exists(dir / "meta.txt")) throw PreconditionError("missing meta.txt in " + dir.string());
  auto kv = parse_kv(read_text(dir / "meta.txt"));
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("meta.txt lacks '" + key + "'");
    return it->second;
  };
  StoredTrajectory st;
  auto& tr = st.traj;
  tr.scheme = get("scheme");
  tr.flow = get("flow");
  tr.metric_id = get("metric_id");
  tr.dt = parse_double(get("dt"), 0);
  tr.record_every = static_cast<std::size_t>(std::stoull(get("record_every")));
  tr.cfl = parse_double(get("cfl"), 0);
  tr.linear_slope = parse_double(get("linear_slope"), 0);
  st.metric.name = get("metric");
  if (kv.count("metric_g")) st.metric.g = kv["metric_g"];
  if (kv.count("metric_g_prime")) st.metric.g_prime = kv["metric_g_prime"];
  if (kv.count("window_lo") && kv.count("window_hi")) {
    st.metric.window = {parse_double(kv["window_lo"], 0), parse_double(kv["window_hi"], 0)};
    st.metric.has_window = true;
  }
  const auto count = static_cast<std::size_t>(std::stoull(get("frames")));
  for (std::size_t k = 0; k < count; ++k) {
    const auto path = dir / frame_name(k);
    if (!fs::exists(path)) throw PreconditionError("missing frame " + path.string());
    tr.frames.push_back(read_snapshot(path).field);
  }
  if (get("blowup") == "true") {
    BlowupRecord b;
    b.t_plus = parse_double(get("t_plus"), 0);
    b.detected_at = parse_double(get("detected_at"), 0);
    b.last_valid_time = parse_double(get("last_valid_time"), 0);
    b.reason = get("reason");
    for (const auto& item : split(kv["concentration"], ';')) {
      if (item.empty()) continue;
      auto parts = split(item, ':');
      if (parts.size() != 2) throw ParseError("malformed concentration entry '" + item + "'");
      b.concentration.emplace_back(parse_double(parts[0], 0), parse_double(parts[1], 0));
    }
    tr.blowup = b;
  }
  return st;
}

std::string format_bubble_report(const BubbleReport& rep) {
  KvWriter kv;
  kv.put("J", rep.J);
  kv.put("ell", rep.ell);
  kv.put("slope", rep.slope);
  kv.put("R", rep.R);
  kv.put("window", rep.window);
  kv.put("thresholds.delta0", rep.thresholds.delta0);
  kv.put("thresholds.eps0", rep.thresholds.eps0);
  for (std::size_t j = 0; j < rep.bubbles.size(); ++j) {
    const auto& b = rep.bubbles[j];
    const std::string p = "bubble." + std::to_string(j + 1) + ".";
    kv.put(p + "ell", b.map.ell());
    kv.put(p + "m", b.map.m());
    kv.put(p + "sign", b.map.sign());
    kv.put(p + "lambda", b.lambda);
    kv.put(p + "energy", b.map.energy());
    kv.put(p + "misfit", b.misfit);
    kv.put(p + "crossing", b.crossing);
  }
  kv.put("ledger.E_total", rep.ledger.E_total);
  kv.put("ledger.sum_bubbles", rep.ledger.sum_bubbles);
  kv.put("ledger.E_residual", rep.ledger.E_residual);
  kv.put("ledger.defect", rep.ledger.defect);
  kv.put("ledger.defect_fraction", rep.ledger.defect_fraction);
  for (std::size_t k = 0; k < rep.errors.size(); ++k) kv.put("error." + std::to_string(k + 1), rep.errors[k]);
  for (std::size_t k = 0; k < rep.warnings.size(); ++k) kv.put("warning." + std::to_string(k + 1), rep.warnings[k]);
  return kv.str();
}

std::string format_pythagorean(const PythagoreanLedger& L) {
  KvWriter kv;
  kv.put("pythagorean.E_total", L.E_total);
  kv.put("pythagorean.sum_bubbles", L.sum_bubbles);
  kv.put("pythagorean.radiation", L.radiation);
  kv.put("pythagorean.defect", L.defect);
  kv.put("pythagorean.defect_fraction", L.defect_fraction);
  kv.put("pythagorean.min_bubble_energy", L.min_bubble_energy);
  kv.put("pythagorean.J_bound", L.J_bound);
  kv.put("pythagorean.J_bound_ok", L.J_bound_ok);
  return kv.str();
}

std::string format_scattering(const ScatteringState& s) {
  KvWriter kv;
  kv.put("ell", s.ell);
  kv.put("slope", s.slope);
  kv.put("t_star", s.t_star);
  kv.put("support", s.support);
  kv.put("alpha", s.alpha);
  kv.put("extension_norm", s.extension_norm);
  kv.put("reversibility_floor", s.reversibility_floor);
  kv.put("match.count", s.match.size());
  for (std::size_t k = 0; k < s.match.size(); ++k) {
    const auto& m = s.match[k];
    kv.put("match." + std::to_string(k + 1),
           format_double(m.t) + " " + format_double(m.error) + " " + format_double(m.reference) + " " +
               format_double(m.scheme_error));
  }
  return kv.str();
}

std::string format_regular_part(const RegularPart& p) {
  KvWriter kv;
  kv.put("ell_star", p.ell_star);
  kv.put("t_plus", p.t_plus);
  kv.put("settle_spread", p.settle_spread);
  kv.put("settle_tolerance", p.settle_tolerance);
  kv.put("tau", p.tau);
  kv.put("phi_energy", p.phi_energy);
  for (std::size_t k = 0; k < p.trace.size(); ++k)
    kv.put("trace." + std::to_string(k + 1), format_double(p.trace[k].t) + " " + format_double(p.trace[k].value));
  for (std::size_t k = 0; k < p.interior_norm.size(); ++k)
    kv.put("interior_norm." + std::to_string(k + 1),
           format_double(p.interior_norm[k].t) + " " + format_double(p.interior_norm[k].value));
  return kv.str();
}

}  // namespace wavemap
