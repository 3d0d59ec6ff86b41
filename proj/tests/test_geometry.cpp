#include <cmath>

#include <doctest.h>

#include "oracles.hpp"
#include "wavemap/error.hpp"
#include "wavemap/geometry.hpp"

using namespace wavemap;

TEST_CASE("eval_G: sphere and Yang-Mills values") {
  const auto S = Metric::sphere();
  CHECK(eval_G(S, 0.0) == 0.0);
  const double two = oracle::integrate([](double x) { return std::abs(std::sin(x)); }, 0.0, M_PI);
  CHECK(std::abs(eval_G(S, M_PI) - two) < 1e-12);
  CHECK(std::abs(eval_G(S, M_PI) - 2.0) < 1e-12);
  // Across sign changes |g| is integrated.
  CHECK(std::abs(eval_G(S, 2.0 * M_PI) - 4.0) < 1e-11);
  CHECK(std::abs(eval_G(S, -M_PI) + 2.0) < 1e-11);

  const auto Y = Metric::yang_mills();
  const double ym = oracle::integrate([](double x) { return 1.0 - x * x; }, 0.0, 1.0);
  CHECK(std::abs(eval_G(Y, 1.0) - ym) < 1e-12);
  CHECK(std::abs(eval_G(Y, 1.0) - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("eval_G: additivity property") {
  const auto S = Metric::sphere();
  for (double a : {-4.0, -1.0, 0.3, 2.0})
    for (double b : {-2.5, 0.9, 5.0}) {
      const double direct = oracle::integrate([](double x) { return std::abs(std::sin(x)); }, std::min(a, b),
                                              std::max(a, b));
      CHECK(std::abs(std::abs(eval_G(S, b) - eval_G(S, a)) - direct) < 1e-10);
    }
}

TEST_CASE("eval_G: nondecreasing on [0, inf), and roots are isolated (property)") {
  for (const auto& m : {Metric::sphere(), Metric::yang_mills()}) {
    CHECK(eval_G(m, 0.0) == 0.0);
    double prev = 0.0;
    for (int k = 1; k <= 400; ++k) {
      const double G = eval_G(m, 0.025 * k);
      CHECK(G >= prev - 1e-14);
      prev = G;
    }
    for (const auto& root : find_vanishing_set(m).roots) {
      if (!std::isfinite(root.gap)) continue;
      CHECK(m.g(root.value - 0.5 * root.gap) != 0.0);
      CHECK(m.g(root.value + 0.5 * root.gap) != 0.0);
    }
  }
}

TEST_CASE("find_vanishing_set: sphere roots k pi with slopes (-1)^k") {
  const auto S = Metric::sphere().with_window({-10.0, 10.0});
  const auto v = find_vanishing_set(S);
  REQUIRE(v.size() == 7);
  for (int k = -3; k <= 3; ++k) {
    const auto& root = v.roots[static_cast<std::size_t>(k + 3)];
    const double oracle_root = oracle::bisect([](double x) { return std::sin(x); }, k * M_PI - 1.0, k * M_PI + 1.0);
    CHECK(std::abs(root.value - oracle_root) < 1e-12);
    CHECK(std::abs(root.slope - (k % 2 == 0 ? 1.0 : -1.0)) < 1e-12);
    CHECK(std::abs(root.gap - M_PI) < 1e-11);
  }
  CHECK(v.find(M_PI).has_value());
  CHECK_FALSE(v.find(1.0).has_value());
  CHECK(v.nearest_index(3.0) == 4);
  CHECK(v.above(6) == std::nullopt);
  CHECK(v.below(0) == std::nullopt);
  CHECK(*v.above(3) == 4);
}

TEST_CASE("find_vanishing_set: Yang-Mills and a single linear root") {
  const auto Y = Metric::yang_mills().with_window({-5.0, 5.0});
  const auto v = find_vanishing_set(Y);
  REQUIRE(v.size() == 2);
  CHECK(std::abs(v.roots[0].value + 1.0) < 1e-12);
  CHECK(std::abs(v.roots[1].value - 1.0) < 1e-12);
  CHECK(std::abs(v.roots[0].slope - 2.0) < 1e-12);
  CHECK(std::abs(v.roots[1].slope + 2.0) < 1e-12);

  const auto L = Metric::custom("x", "1", {-1.0, 1.0});
  const auto w = find_vanishing_set(L);
  REQUIRE(w.size() == 1);
  CHECK(std::abs(w.roots[0].value) < 1e-12);
  CHECK(std::isinf(w.roots[0].gap));
}

TEST_CASE("find_vanishing_set: degenerate root is refused") {
  const auto D = Metric::custom("x^2 - 1", "2*x", {-3.0, 3.0});
  CHECK(find_vanishing_set(D).size() == 2);
  const auto bad = Metric::custom("(x - 1)^3", "3*(x - 1)^2", {-3.0, 3.0});
  CHECK_THROWS_AS(find_vanishing_set(bad), PreconditionError);
}

TEST_CASE("check_assumptions: sphere, Yang-Mills, linear") {
  {
    const auto S = Metric::sphere();
    const auto r = check_assumptions(S, find_vanishing_set(S));
    CHECK(r.a1);
    CHECK(r.a2);
    CHECK(r.a3);
    CHECK(r.a3_prime);
  }
  {
    const auto Y = Metric::yang_mills();
    const auto r = check_assumptions(Y, find_vanishing_set(Y));
    CHECK_FALSE(r.a3);
    CHECK(r.a3_prime);
  }
  {
    const auto L = Metric::custom("x", "1", {-1.0, 1.0});
    const auto r = check_assumptions(L, find_vanishing_set(L));
    CHECK(r.a1);
    CHECK(r.a2);
    CHECK(r.a3);
  }
}

TEST_CASE("metric: by_name and custom expressions agree with closed forms") {
  const auto S = Metric::by_name("sphere");
  const auto C = Metric::custom("sin(x)", "cos(x)", S.search_window());
  for (double x : {-3.0, -0.5, 0.0, 1.2, 2.9}) {
    CHECK(S.g(x) == doctest::Approx(std::sin(x)).epsilon(1e-15));
    CHECK(S.f(x) == doctest::Approx(std::sin(x) * std::cos(x)).epsilon(1e-15));
    CHECK(C.g(x) == doctest::Approx(S.g(x)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(Metric::by_name("torus"), Error);
  CHECK(std::abs(sup_abs_g(S, 0.0, M_PI) - 1.0) < 1e-10);
}
