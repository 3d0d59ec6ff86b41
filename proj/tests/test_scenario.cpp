#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include <doctest.h>

#include "wavemap/error.hpp"
#include "wavemap/scenario.hpp"

using namespace wavemap;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const char* env = std::getenv("WAVEMAP_TEST_TMP");
  const fs::path dir = fs::path(env ? env : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  return dir;
}

const char* kSmall = R"(# small run
[metric]
name = sphere

[data]
family = random_bumps
ell = 0
count = 2
amplitude = 0.1
centers = 4, 8
widths = 1, 2
seed = 42

[grid]
r_max = 20
n_points = 512

[time]
t_final = 4
record_every = 8

[pipeline]
stages = select_times
select_count = 3

[output]
frames = false
)";
}  // namespace

TEST_CASE("parse_scenario: sections, expressions and lists") {
  const auto sc = parse_scenario(R"(
[metric]
name = sphere
[data]
family = planted
ell = 2*pi
planted = pi 2*pi 0.1; 0 pi 1e-3
[grid]
r_max = 4
n_points = 65536
[time]
t_final = 0.01
boundary = absorbing
[pipeline]
stages = bubbles, select_times
R = 1
delta_prime = 0.01
)");
  CHECK(sc.data.family == "planted");
  CHECK(sc.data.ell == 2.0 * M_PI);
  REQUIRE(sc.data.planted.size() == 2);
  CHECK(sc.data.planted[0].outer == 2.0 * M_PI);
  CHECK(sc.data.planted[1].lambda == 1e-3);
  CHECK(sc.boundary == OuterBoundary::absorbing);
  CHECK(sc.pipeline.stages == std::vector<std::string>{"bubbles", "select_times"});
  CHECK(sc.pipeline.R == 1.0);
  CHECK(sc.pipeline.delta_prime == 0.01);
  CHECK(std::isnan(parse_scenario("[pipeline]\nR = 1\n").pipeline.delta_prime));
  CHECK_NOTHROW(validate_scenario(sc, sc.metric.build()));
}

TEST_CASE("parse_scenario: errors carry line numbers") {
  try {
    parse_scenario("[metric]\nname = sphere\nbogus = 1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    parse_scenario("[grid]\nr_max = 10\n\n[nowhere]\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  try {
    parse_scenario("[grid]\nn_points = many\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_scenario("r_max = 3\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[pipeline]\nstages = everything\n"), ParseError);
}

TEST_CASE("validate_scenario: grid floor, roots, chaining and resolution") {
  auto sc = parse_scenario("[grid]\nr_max = 10\nn_points = 10\n");
  const auto S = sc.metric.build();
  CHECK_THROWS_WITH_AS(validate_scenario(sc, S), doctest::Contains("grid floor"), PreconditionError);

  sc = parse_scenario("[data]\nell = 1\n");
  CHECK_THROWS_AS(validate_scenario(sc, S), PreconditionError);

  sc = parse_scenario("[data]\nfamily = planted\nell = pi\nplanted = 0 pi 0.1; pi 2*pi 0.001\n[grid]\nr_max = 4\nn_points = 65536\n");
  CHECK_THROWS_WITH_AS(validate_scenario(sc, S), doctest::Contains("chain"), PreconditionError);

  sc = parse_scenario("[data]\nfamily = bubble\ninner = 0\nouter = pi\nlambda = 0.01\n[grid]\nr_max = 10\nn_points = 1024\n");
  CHECK_THROWS_WITH_AS(validate_scenario(sc, S), doctest::Contains("under-resolved"), PreconditionError);
}

TEST_CASE("run_scenario: deterministic series and selection") {
  const auto sc = parse_scenario(kSmall);
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto ra = run_scenario(sc, a);
  const auto rb = run_scenario(sc, b);
  CHECK(ra.status == "ok");
  CHECK(ra.exit_code() == 0);
  CHECK(rb.errors.empty());
  REQUIRE(fs::exists(a / "series.csv"));
  CHECK(read_text(a / "series.csv") == read_text(b / "series.csv"));
  CHECK(read_text(a / "selected_times.txt") == read_text(b / "selected_times.txt"));
  CHECK(read_text(a / "report.txt") == read_text(b / "report.txt"));
  CHECK_FALSE(fs::exists(a / "frame_00000.snap"));
  const auto rows = parse_series(read_text(a / "series.csv"));
  REQUIRE_FALSE(rows.empty());
  CHECK(rows.front().E_drift == 0.0);
  for (const auto& r : rows) CHECK(std::abs(r.E_drift) < 1e-3);
}

TEST_CASE("run_scenario: bubbles with selection writes the residual trend and equivalence block") {
  auto sc = parse_scenario(kSmall);
  sc.pipeline.stages = {"select_times", "bubbles"};
  const auto dir = scratch("run_trend");
  const auto r = run_scenario(sc, dir);
  CHECK(r.errors.empty());
  const auto trend = read_text(dir / "residual_trend.txt");
  const auto sel = read_text(dir / "selected_times.txt");
  CHECK(std::count(trend.begin(), trend.end(), '\n') == std::count(sel.begin(), sel.end(), '\n'));
  CHECK(trend.find("nan") == std::string::npos);
  const auto bubbles = read_text(dir / "bubbles.txt");
  CHECK(bubbles.find("equivalence.delta_prime_heuristic true") != std::string::npos);
  CHECK(bubbles.find("equivalence.ok true") != std::string::npos);
}

TEST_CASE("run_scenario: a failing stage becomes an error entry with exit 1") {
  auto sc = parse_scenario(kSmall);
  sc.pipeline.stages = {"scattering"};
  const auto r = run_scenario(sc, scratch("run_err"));
  CHECK(r.status == "error");
  CHECK(r.exit_code() == 1);
  REQUIRE_FALSE(r.errors.empty());
}

TEST_CASE("run_scenario: blow-up truncation exits 0") {
  const auto sc = parse_scenario(R"(
[data]
family = collapsing
inner = 0
outer = pi
lambda = 1
kappa = 0.5
[grid]
r_max = 10
n_points = 4096
[time]
t_final = 6
record_every = 20
[output]
frames = false
)");
  const auto r = run_scenario(sc, scratch("run_blowup"));
  CHECK(r.status == "truncated");
  CHECK(r.exit_code() == 0);
}

TEST_CASE("scenario: snapshot family resolves paths against the config directory") {
  const auto sc = parse_scenario("[data]\nfamily = snapshot\nsnapshot = init.snap\n", "/some/dir");
  CHECK(sc.data.snapshot == fs::path("/some/dir/init.snap"));
}
