#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shadow_ode/error.hpp"
#include "shadow_ode/perturb.hpp"

using namespace shadow_ode;
using namespace shadow_ode::perturb;

namespace {

grid::GridSpec spec(double y0, std::uint64_t n, double t_max = 1.0) {
  grid::GridSpec s;
  s.y0 = {y0};
  s.n0 = n;
  s.t_max = t_max;
  return s;
}

}  // namespace

TEST_CASE("known solution gate") {
  const auto f = expr::parse("y", 1);
  KnownSolution::parse("exp(x)", "exp(x)", 0, 1).check_against(f);
  CHECK_THROWS_AS(KnownSolution::parse("exp(x)", "2*exp(x)", 0, 1).check_against(f), ValidationError);
  CHECK_THROWS_AS(KnownSolution::parse("exp(x)", "exp(x)", 0, 0), ValidationError);
}

TEST_CASE("zero field recovers a zero perturbation") {
  const auto f = expr::parse("0", 1);
  const auto k = KnownSolution::parse("0", "0", 0, 1);
  const auto s = spec(0, 256);
  const auto p = recover(f, k, s);
  CHECK(p.kind() == grid::Perturbation::Kind::recorded);
  CHECK(p.eps_max() == 0.0);
  for (std::size_t i = 0; i < p.steps(); ++i) CHECK(p.abscissas()[i] == s.x(i));
  CHECK(verify_roundtrip(f, k, p, s) == 0.0);
}

TEST_CASE("exponential: mean-value points inside each step") {
  const auto f = expr::parse("y", 1);
  const auto k = KnownSolution::parse("exp(x)", "exp(x)", 0, 1);
  const auto s = spec(1, 4096);
  const auto p = recover(f, k, s);
  CHECK(p.eps_max() <= 2e-3);
  for (std::size_t i = 0; i < p.steps(); ++i) {
    const double t = p.abscissas()[i];
    CHECK(t > s.x(i));
    CHECK(t < s.x(i + 1));
    // Direct formula eps_k = e^{t_k} - e^{x_k}.
    CHECK(p.values()[i] == doctest::Approx(std::exp(t) - std::exp(s.x(i))).epsilon(1e-9).scale(1e-12));
  }
  CHECK(verify_roundtrip(f, k, p, s) <= 1e-9 * std::exp(1.0));
}

TEST_CASE("square root field and x squared") {
  const auto f = expr::parse("2*sqrt(abs(y))", 1);
  const auto k = KnownSolution::parse("x^2", "2*x", 0, 1);
  const auto s = spec(0, 4096);
  const auto p = recover(f, k, s);
  CHECK(p.eps_max() <= 4 * s.h());
  CHECK(verify_roundtrip(f, k, p, s) <= 1e-8);
}

TEST_CASE("recovery smallness scales with the step") {
  const auto f = expr::parse("y", 1);
  const auto k = KnownSolution::parse("exp(x)", "exp(x)", 0, 1);
  for (std::uint64_t n : {256u, 1024u, 4096u}) {
    const auto p = recover(f, k, spec(1, n));
    // sup |y''| h with y'' = e^x on [0, 1].
    CHECK(p.eps_max() <= std::exp(1.0) / static_cast<double>(n));
  }
}

TEST_CASE("steps past c get no perturbation") {
  const auto f = expr::parse("y", 1);
  const auto k = KnownSolution::parse("exp(x)", "exp(x)", 0, 0.5);
  const auto s = spec(1, 256, 1.0);
  const auto p = recover(f, k, s);
  for (std::size_t i = 0; i < p.steps(); ++i) {
    if (s.x(i + 1) > 0.5) {
      CHECK(p.values()[i] == 0.0);
      CHECK(std::isnan(p.abscissas()[i]));
    } else {
      CHECK(p.values()[i] > 0.0);
    }
  }
  CHECK(verify_roundtrip(f, k, p, s) <= 1e-9);
}

TEST_CASE("recover errors") {
  const auto k2 = KnownSolution::parse("cos(x); -sin(x)", "-sin(x); -cos(x)", 0, 1);
  grid::GridSpec s;
  s.y0 = {1, 0};
  s.n0 = 64;
  CHECK_THROWS_AS(recover(expr::parse("y1; -y0", 2), k2, s), SystemsUnsupported);
  // A kink in y (not C1) leaves no mean value point for the step across it.
  const auto kink = KnownSolution::parse("abs(x - 0.3)", "sign(x - 0.3)", 0, 1);
  CHECK_THROWS_AS(recover(expr::parse("0", 1), kink, spec(0.3, 8)), NoMeanValuePoint);
  CHECK_THROWS_AS(recover(expr::parse("y", 1), KnownSolution::parse("exp(x)", "exp(x)", 0, 1), spec(2, 64)),
                  ValidationError);
}

TEST_CASE("funnel clustering") {
  peano::SolveOptions o;
  o.n0 = 256;
  o.refinements = 6;
  o.t_max = 1;
  o.tol = 1e-3;
  o.spacing = 0x1p-6;

  const std::vector<grid::PerturbationRule> unique_rules = {grid::PerturbationRule::parse("zero"),
                                                            grid::PerturbationRule::parse("const:1e-5"),
                                                            grid::PerturbationRule::parse("const:-1e-5")};
  const auto lin = funnel(expr::parse("y", 1), 0, {1.0}, unique_rules, o);
  CHECK(lin.cluster_count == 1);

  const auto sq = expr::parse("2*sqrt(abs(y))", 1);
  const auto zero = funnel(sq, 0, {0.0}, {grid::PerturbationRule::parse("zero")}, o);
  for (const auto& s : zero.members[0].solution.samples) CHECK(s.y[0] == 0.0);

  std::vector<grid::PerturbationRule> rules;
  for (const char* r : {"zero", "const:1e-3", "const:1e-4", "const:1e-5"}) rules.push_back(grid::PerturbationRule::parse(r));
  const auto f = funnel(sq, 0, {0.0}, rules, o);
  CHECK(f.cluster_count >= 2);
  CHECK(f.members[0].cluster == 0);
  // Larger c pushes the solution up: pointwise nonincreasing in c within 3 tol.
  for (std::size_t i = 2; i < f.members.size(); ++i) {
    for (const auto& s : f.members[i].solution.samples) {
      const auto* b = f.members[i - 1].solution.sample_at(s.x);
      if (b) CHECK(s.y[0] <= b->y[0] + 3 * o.tol);
    }
  }
  CHECK_THROWS_AS(funnel(sq, 0, {0.0}, {}, o), ValidationError);
}
