#include <cmath>
#include <cstdlib>
#include <filesystem>

#include <doctest.h>

#include "wavemap/data.hpp"
#include "wavemap/error.hpp"
#include "wavemap/evolution.hpp"
#include "wavemap/io.hpp"

using namespace wavemap;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const char* env = std::getenv("WAVEMAP_TEST_TMP");
  const fs::path dir = fs::path(env ? env : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("format_double: lossless round trip") {
  Xorshift64Star rng(99);
  for (int k = 0; k < 2000; ++k) {
    const double x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.uniform(-300.0, 300.0)));
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("snapshot: write, read, write is byte-identical") {
  const RadialGrid g(12.5, 777);
  auto f = bump_data(g, M_PI, {{0.3, 4.0, 1.5}});
  f.time = 1.0 / 3.0;
  for (std::size_t i = 0; i <= g.n(); ++i) f.psi_dot[i] = std::sin(g.r(i)) / 7.0;
  const std::string a = format_snapshot(f, "sphere");
  const auto snap = parse_snapshot(a);
  CHECK(snap.metric_id == "sphere");
  CHECK(snap.field.psi == f.psi);
  CHECK(snap.field.psi_dot == f.psi_dot);
  CHECK(snap.field.time == f.time);
  CHECK(snap.field.ell0 == f.ell0);
  CHECK(snap.field.ell_inf == f.ell_inf);
  CHECK(snap.field.grid.dr() == g.dr());
  CHECK(format_snapshot(snap.field, snap.metric_id) == a);

  const auto dir = scratch("snap");
  write_snapshot(dir / "a.snap", f, "sphere");
  const auto back = read_snapshot(dir / "a.snap");
  write_snapshot(dir / "b.snap", back.field, back.metric_id);
  CHECK(read_text(dir / "a.snap") == read_text(dir / "b.snap"));
}

TEST_CASE("snapshot: malformed text is rejected") {
  CHECK_THROWS_AS(parse_snapshot("hello\n"), Error);
  CHECK_THROWS_AS(parse_snapshot("# wavemap-snapshot v1\n# metric sphere\n0 1\n"), Error);
  CHECK_THROWS_AS(read_snapshot("/nonexistent/path.snap"), Error);
}

TEST_CASE("series: round trip including NaN columns") {
  std::vector<SeriesRow> rows(3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].t = 0.1 * static_cast<double>(k);
    rows[k].E_total = 1.0 / (3.0 + static_cast<double>(k));
    rows[k].E_kin = 0.25;
    rows[k].E_drift = k == 0 ? 0.0 : 1e-7 * static_cast<double>(k);
  }
  const auto text = format_series(rows);
  CHECK(text.rfind("t,E_total", 0) == 0);
  const auto back = parse_series(text);
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back[k].t == rows[k].t);
    CHECK(back[k].E_total == rows[k].E_total);
    CHECK(back[k].E_drift == rows[k].E_drift);
    CHECK(std::isnan(back[k].E_selfsim));
  }
  CHECK(format_series(back) == text);
}

TEST_CASE("trajectory: directory round trip with a blow-up record") {
  const auto S = Metric::sphere();
  const RadialGrid g(10.0, 256);
  auto traj = evolve(bump_data(g, 0.0, {{0.2, 4.0, 2.0}}), S, 2.0, 16);
  BlowupRecord rec;
  rec.t_plus = 2.5;
  rec.detected_at = 2.0;
  rec.last_valid_time = 1.9;
  rec.reason = "concentration";
  rec.concentration = {{1.0, 0.5}, {1.5, 0.25}};
  traj.blowup = rec;
  const auto dir = scratch("traj");
  write_trajectory(dir, traj, MetricSpec::of(S));
  const auto st = read_trajectory(dir);
  REQUIRE(st.traj.frames.size() == traj.frames.size());
  for (std::size_t k = 0; k < traj.frames.size(); ++k) CHECK(st.traj.frames[k].psi == traj.frames[k].psi);
  CHECK(st.traj.dt == traj.dt);
  CHECK(st.traj.record_every == traj.record_every);
  CHECK(st.metric.name == "sphere");
  REQUIRE(st.traj.blowup.has_value());
  CHECK(st.traj.blowup->t_plus == 2.5);
  CHECK(st.traj.blowup->concentration.size() == 2);
  CHECK(st.traj.blowup->concentration[1].second == 0.25);
  CHECK_THROWS_AS(read_trajectory(dir / "missing"), PreconditionError);
}

TEST_CASE("metric spec: custom expressions survive the round trip") {
  const auto C = Metric::custom("sin(x) + 0.1*sin(2*x)", "cos(x) + 0.2*cos(2*x)", {-4.0, 4.0});
  const auto spec = MetricSpec::of(C);
  const auto back = spec.build();
  for (double x : {-3.0, 0.5, 2.0}) CHECK(back.g(x) == C.g(x));
  CHECK(back.search_window().lo == -4.0);
}

TEST_CASE("resolve on a stored planted two-bubble snapshot finds J = 2") {
  const auto S = Metric::sphere();
  const auto v = find_vanishing_set(S);
  const RadialGrid g(4.0, 64000);
  const auto f = planted_bubbles(g, 2.0 * M_PI,
                                 {{build_connector(S, v, M_PI, 2.0 * M_PI), 0.1}, {build_connector(S, v, 0.0, M_PI), 1e-3}});
  const auto dir = scratch("resolve");
  write_snapshot(dir / "two.snap", f, S.id());
  const auto snap = read_snapshot(dir / "two.snap");
  const auto rep = extract_bubbles(snap.field, S, 1.0);
  CHECK(rep.J == 2);
  const auto text = format_bubble_report(rep);
  CHECK(text.find("J 2\n") != std::string::npos);
  CHECK(text.find("bubble.2.lambda") != std::string::npos);
}
