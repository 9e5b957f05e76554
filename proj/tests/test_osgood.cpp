#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "shadow_ode/error.hpp"
#include "shadow_ode/osgood.hpp"

using namespace shadow_ode;
using namespace shadow_ode::osgood;

namespace {

peano::SolveOptions opts(double t_max = 1.0) {
  peano::SolveOptions o;
  o.n0 = 1024;
  o.refinements = 8;
  o.t_max = t_max;
  o.tol = 1e-4;
  o.spacing = 0x1p-7;
  return o;
}

OsgoodOptions ladder(int j_eps = 8) {
  OsgoodOptions o;
  o.eps0 = 1e-2;
  o.j_eps = j_eps;
  return o;
}

double sup_err(const shadow::Solution& s, double (*f)(double), double upto = 1.0) {
  double e = 0;
  for (const auto& p : s.samples)
    if (p.x <= upto) e = std::max(e, std::abs(p.y[0] - f(p.x)));
  return e;
}

}  // namespace

TEST_CASE("superequation equals solve_global with a constant perturbation") {
  const auto f = expr::parse("y", 1);
  const std::vector<double> y0 = {1.0};
  const auto a = solve_super(f, 0, y0, 1e-4, opts());
  auto o = opts();
  o.rule = grid::PerturbationRule::parse("const:1e-4");
  const auto b = peano::solve_global(f, 0, y0, o);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].y == b.samples[i].y);
  for (const auto& s : a.samples) CHECK(std::abs(s.y[0] - oracle::linear_super(s.x, 1e-4)) <= 1e-3);
  CHECK_THROWS_AS(solve_super(f, 0, y0, -1.0, opts()), ValidationError);
}

TEST_CASE("constant field plus eps is linear") {
  const auto s = solve_super(expr::parse("0", 1), 0, std::vector<double>{0.0}, 0.125, opts());
  for (const auto& p : s.samples) CHECK(p.y[0] == 0.125 * p.x);
}

TEST_CASE("square root superequation lies between the comparison solutions") {
  const double eps = 1e-3;
  const auto s = solve_super(expr::parse("2*sqrt(abs(y))", 1), 0, std::vector<double>{0.0}, eps, opts());
  for (const auto& p : s.samples) {
    if (p.x > 0) CHECK(p.y[0] > 0.0);
    CHECK(p.y[0] >= p.x * p.x - 1e-4);
    const double upper = p.x + 2 * std::sqrt(eps);
    CHECK(p.y[0] <= upper * upper);
  }
}

TEST_CASE("maximal and minimal solutions of y' = 2 sqrt|y|") {
  const auto f = expr::parse("2*sqrt(abs(y))", 1);
  const auto mx = maximal(f, 0, 0, ladder(), opts());
  CHECK(sup_err(mx.base, [](double x) { return x * x; }) <= 1e-2);
  CHECK(!mx.not_globally_resolved);
  CHECK(mx.domination_margin >= -3e-4);
  // Cauchy gaps shrink along the ladder.
  for (std::size_t j = 1; j < mx.cauchy_gaps.size(); ++j) CHECK(mx.cauchy_gaps[j] <= mx.cauchy_gaps[j - 1]);

  const auto mn = minimal(f, 0, 0, ladder(), opts());
  CHECK(sup_err(mn.base, [](double) { return 0.0; }) <= 1e-2);

  const auto zero = peano::solve_global(f, 0, std::vector<double>{0.0}, opts());
  const auto d1 = domination_check(mx, zero, 1e-4);
  CHECK(d1.dominates);
  CHECK(d1.worst_gap >= -1e-12);
  const auto d2 = domination_check(zero, mx.base, 1e-4);
  CHECK(!d2.dominates);
  const auto self = domination_check(mx, mx.base, 1e-4);
  CHECK(self.dominates);
  CHECK(self.worst_gap == 0.0);
}

TEST_CASE("unique solutions: maximal equals the solution") {
  const auto f = expr::parse("y", 1);
  const auto zero = maximal(f, 0, 0, ladder(), opts());
  CHECK(sup_err(zero.base, [](double) { return 0.0; }) <= 1e-3);
  const auto mn = minimal(f, 0, 1, ladder(), opts());
  CHECK(sup_err(mn.base, [](double x) { return std::exp(x); }) <= 5e-3);
  // The finite ladder leaves about eps_J * x on the zero field.
  const auto z = minimal(expr::parse("0", 1), 0, 0, ladder(), opts());
  for (const auto& p : z.base.samples) CHECK(std::abs(p.y[0]) <= 1e-4);
}

TEST_CASE("segments glue continuously") {
  const auto f = expr::parse("3*abs(y)^(2/3)", 1);
  const auto mx = maximal(f, 0, 0, ladder(10), opts());
  CHECK(sup_err(mx.base, [](double x) { return x * x * x; }) <= 2e-2);
  for (std::size_t k = 1; k < mx.segments.size(); ++k) {
    CHECK(mx.segments[k].start_x == mx.segments[k - 1].end_x);
    const auto* s = mx.base.sample_at(mx.segments[k].start_x);
    REQUIRE(s != nullptr);
    CHECK(s->y[0] == mx.segments[k].start_value);
  }
  CHECK(mx.segments.front().start_x == 0.0);
}

TEST_CASE("resolution guard refines the member grids") {
  peano::SolveOptions o = opts();
  OsgoodOptions g = ladder();
  CHECK(member_n0(1e-2, g, o) == 1024);
  CHECK(member_n0(1e-5, g, o) >= 2.0 / 1e-5 / 64);
  g.resolution = 0;
  CHECK(member_n0(1e-9, g, o) == 1024);
}

TEST_CASE("osgood errors") {
  CHECK_THROWS_AS(maximal(expr::parse("y1; y0", 2), 0, 0, ladder(), opts()), SystemsUnsupported);
  auto bad = ladder();
  bad.j_eps = 2;
  CHECK_THROWS_AS(maximal(expr::parse("y", 1), 0, 0, bad, opts()), InsufficientLadder);
  bad = ladder();
  bad.eps0 = 0;
  CHECK_THROWS_AS(maximal(expr::parse("y", 1), 0, 0, bad, opts()), ValidationError);
}
