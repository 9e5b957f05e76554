#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "shadow_ode/error.hpp"
#include "shadow_ode/parallel.hpp"
#include "shadow_ode/peano.hpp"

using namespace shadow_ode;
using namespace shadow_ode::peano;

namespace {

SolveOptions small(double t_max = 2.0) {
  SolveOptions o;
  o.n0 = 256;
  o.refinements = 6;
  o.t_max = t_max;
  o.tol = 1e-3;
  o.spacing = 0x1p-6;
  return o;
}

std::string csv(const shadow::Solution& s) {
  std::ostringstream os;
  s.write_csv(os);
  return os.str();
}

}  // namespace

TEST_CASE("zero field gives the zero solution on the whole horizon") {
  const auto sol = solve_global(expr::parse("0", 1), 0, std::vector<double>{0.0}, small());
  CHECK(!sol.blow_up);
  CHECK(sol.reached_horizon);
  CHECK(sol.a_est == 2.0);
  for (const auto& s : sol.samples) CHECK(s.y[0] == 0.0);
  CHECK(residual_check(sol, sol.field, 20) == 0.0);
}

TEST_CASE("riccati blows up at 1") {
  const auto sol = solve_global(expr::parse("y*y", 1), 0, std::vector<double>{1.0}, SolveOptions{});
  CHECK(sol.blow_up);
  CHECK(sol.a_est >= 0.99);
  CHECK(sol.a_est <= 1.01);
  // Noncontinuability surrogate on the last limited values.
  const auto& tail = sol.frontier.empty() ? sol.samples : sol.frontier;
  const double last = std::abs(tail.back().y[0]);
  const double earlier = std::abs(sol.samples[sol.samples.size() * 9 / 10].y[0]);
  CHECK((last >= 0.5e6 || last >= 10 * earlier));
}

TEST_CASE("harmonic oscillator system") {
  auto o = small(6.28);
  o.n0 = 1024;
  o.refinements = 8;
  o.tol = 1e-4;
  const auto sol = solve_global(expr::parse("y1; -y0", 2), 0, std::vector<double>{1.0, 0.0}, o);
  CHECK(!sol.blow_up);
  double err = 0;
  for (const auto& s : sol.samples) {
    err = std::max({err, std::abs(s.y[0] - std::cos(s.x)), std::abs(s.y[1] + std::sin(s.x))});
    const auto ref = oracle::rk4([](double, const std::vector<double>& y) { return std::vector<double>{y[1], -y[0]}; },
                                 0, {1.0, 0.0}, s.x, 400);
    CHECK(std::abs(s.y[0] - ref[0]) <= 1e-2);
  }
  CHECK(err <= 1e-2);
}

TEST_CASE("residual identity") {
  const auto field = expr::parse("y", 1);
  auto o = small();
  o.n0 = 1024;
  o.refinements = 8;
  o.tol = 1e-4;
  const auto sol = solve_global(field, 0, std::vector<double>{1.0}, o);
  CHECK(residual_check(sol, field, 30) <= 5e-3);

  // Superequation: the residual against F alone picks up eps*(z-x).
  const auto sq = expr::parse("2*sqrt(abs(y))", 1);
  auto so = small(1.0);
  so.rule = grid::PerturbationRule::parse("const:1e-4");
  const auto sup = solve_global(sq, 0, std::vector<double>{0.0}, so);
  CHECK(residual_check(sup, sq, 30) <= 5e-3 + 1e-4 * 1.0);

  shadow::Solution lonely = sol;
  lonely.samples.resize(1);
  CHECK_THROWS_AS(residual_check(lonely, field, 3), ValidationError);
}

TEST_CASE("determinism across thread counts") {
  const auto field = expr::parse("x - y*y", 1);
  auto o = small();
  o.rule = grid::PerturbationRule::parse("rand:1e-3:5");
  set_worker_limit(1);
  const auto a = csv(solve_global(field, 0, std::vector<double>{0.5}, o));
  set_worker_limit(4);
  const auto b = csv(solve_global(field, 0, std::vector<double>{0.5}, o));
  set_worker_limit(0);
  CHECK(a == b);
}

TEST_CASE("two-sided solutions extend the one-sided one") {
  const auto field = expr::parse("y", 1);
  auto o = small(1.0);
  const auto one = solve_global(field, 0, std::vector<double>{1.0}, o);
  o.two_sided = true;
  const auto both = solve_global(field, 0, std::vector<double>{1.0}, o);
  CHECK(both.a_lower == -1.0);
  CHECK(both.first_x() == -1.0);
  std::size_t matched = 0;
  for (const auto& s : one.samples) {
    const auto* t = both.sample_at(s.x);
    REQUIRE(t != nullptr);
    CHECK(t->y == s.y);
    ++matched;
  }
  CHECK(matched == one.samples.size());
  CHECK(std::abs(both.value_at(-1.0)[0] - std::exp(-1.0)) <= 1e-2);

  // y' = -y^2 from y(0) = 1 blows up backward at x = -1.
  auto ob = small(2.0);
  ob.two_sided = true;
  ob.n0 = 1024;
  ob.refinements = 8;
  const auto back = solve_global(expr::parse("-y*y", 1), 0, std::vector<double>{1.0}, ob);
  CHECK(back.blow_up_lower);
  CHECK(std::abs(back.a_lower + 1.0) <= 1e-2);
  CHECK(back.reached_horizon);
}

TEST_CASE("zero perturbation is the canonical solution") {
  // Regression pin: y' = 2 sqrt|y|, y(0) = 0 stays at 0 under the zero rule, while any
  // positive constant perturbation leaves it.
  const auto field = expr::parse("2*sqrt(abs(y))", 1);
  const auto z = solve_global(field, 0, std::vector<double>{0.0}, small(1.0));
  for (const auto& s : z.samples) CHECK(s.y[0] == 0.0);
  CHECK(z.provenance == "zero");
  auto o = small(1.0);
  o.rule = grid::PerturbationRule::parse("const:1e-6");
  const auto p = solve_global(field, 0, std::vector<double>{0.0}, o);
  CHECK(p.samples.back().y[0] > 0.5);
  CHECK(p.provenance == "const:1e-06");
}

TEST_CASE("errors") {
  auto o = small();
  o.refinements = 2;
  CHECK_THROWS_AS(solve_global(expr::parse("y", 1), 0, std::vector<double>{1.0}, o), InsufficientLadder);
  o = small();
  o.n0 = 100;
  CHECK_THROWS_AS(solve_global(expr::parse("y", 1), 0, std::vector<double>{1.0}, o), ValidationError);
  o = small();
  o.spacing = 0.03;
  CHECK_THROWS_AS(solve_global(expr::parse("y", 1), 0, std::vector<double>{1.0}, o), ValidationError);
  CHECK_THROWS_AS(solve_global(expr::parse("log(y)", 1), 0, std::vector<double>{-1.0}, small()), DomainError);
  CHECK_THROWS_AS(solve_global(expr::parse("y", 1), 0, std::vector<double>{1.0, 2.0}, small()), DimensionMismatch);
}
