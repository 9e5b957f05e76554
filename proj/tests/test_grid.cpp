#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "shadow_ode/error.hpp"
#include "shadow_ode/grid.hpp"

using namespace shadow_ode;
using namespace shadow_ode::grid;

namespace {

GridSpec make_spec(double y0, std::uint64_t n0, double t_max, int level = 0) {
  GridSpec s;
  s.y0 = {y0};
  s.n0 = n0;
  s.level = level;
  s.t_max = t_max;
  return s;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("grid arithmetic") {
  auto s = make_spec(0, 1024, 2.0, 2);
  CHECK(s.n() == 4096);
  CHECK(s.h() == 0x1p-12);
  CHECK(s.k_max() == 8192);
  CHECK(s.x(4096) == 1.0);
  s.t_max = 1e9;
  CHECK(s.k_max() == 4096ull * 4096ull);  // capped at N^2
  s.k_max_override = 10;
  CHECK(s.k_max() == 10);
  CHECK_THROWS_AS(make_spec(0, 1000, 1).validate(), ValidationError);
  CHECK_THROWS_AS(make_spec(0, 1024, 0).validate(), ValidationError);
}

TEST_CASE("zero and constant fields") {
  const auto zero = integrate(expr::parse("0", 1), make_spec(0, 64, 1), Perturbation::zero(), 1e6);
  CHECK(zero.stop_reason == StopReason::budget_exhausted);
  CHECK(zero.k_stop == 64);
  for (std::uint64_t k = 0; k <= zero.k_stop; ++k) CHECK(zero.y(k)[0] == 0.0);

  const auto one = integrate(expr::parse("1", 1), make_spec(0, 1024, 1), Perturbation::zero(), 1e6);
  for (std::uint64_t k = 0; k <= 1024; ++k) CHECK(one.y(k)[0] == static_cast<double>(k) * 0x1p-10);
}

TEST_CASE("riccati escapes near the blow-up") {
  const auto t = integrate(expr::parse("y*y", 1), make_spec(1, 4096, 2), Perturbation::zero(), 1e6);
  CHECK(t.stop_reason == StopReason::escaped);
  const double x = t.x(t.k_stop);
  CHECK(x > 0.9);
  CHECK(x < 1.1);
  CHECK(std::abs(t.y(t.k_stop)[0]) > 1e6);
}

TEST_CASE("recursion replay matches an independent Euler loop bit for bit") {
  auto f = [](double x, double y) { return std::sin(x) * y - 0.5 * y * y; };
  const auto field = expr::parse("sin(x)*y - 0.5*y*y", 1);
  const auto traj = integrate(field, make_spec(0.75, 512, 1.5), Perturbation::constant(1e-3), 1e6);
  const auto ref = oracle::euler_scalar(f, 0, 0.75, 0x1p-9, 768, 1e-3);
  REQUIRE(traj.k_stop == 768);
  for (std::uint64_t k = 0; k <= 768; ++k) CHECK(traj.y(k)[0] == ref[k]);

  // A second run is identical too.
  const auto again = integrate(field, make_spec(0.75, 512, 1.5), Perturbation::constant(1e-3), 1e6);
  for (std::uint64_t k = 0; k <= 768; ++k) CHECK(again.y(k)[0] == traj.y(k)[0]);
}

TEST_CASE("summation identity") {
  const auto field = expr::parse("y1; -y0 + 0.1*sin(x)", 2);
  GridSpec s;
  s.y0 = {1.0, 0.0};
  s.n0 = 1024;
  s.t_max = 3;
  const auto pert = PerturbationRule::parse("rand:1e-3:42").realize(0, s.k_max(), 2);
  const auto traj = integrate(field, s, pert, 1e6);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uint64_t k = rng() % traj.k_stop, l = rng() % traj.k_stop;
    if (k > l) std::swap(k, l);
    if (k == l) ++l;
    for (std::size_t c = 0; c < 2; ++c) {
      long double acc = traj.y(k)[c];
      double max_y = 0;
      for (std::uint64_t i = k; i < l; ++i) {
        const auto y = traj.y(i);
        const double fi = c == 0 ? y[1] : -y[0] + 0.1 * std::sin(traj.x(i));
        acc += static_cast<long double>((fi + pert.at(i, c)) * s.h());
        max_y = std::max({max_y, std::abs(y[0]), std::abs(y[1])});
      }
      CHECK(std::abs(traj.y(l)[c] - static_cast<double>(acc)) <= (l - k) * 0x1p-48 * std::max(1.0, max_y));
    }
  }
}

TEST_CASE("monotone escape") {
  const auto field = expr::parse("y*y", 1);
  std::uint64_t previous = 0;
  for (double r : {1e2, 1e3, 1e4, 1e6, 1e8}) {
    const auto t = integrate(field, make_spec(1, 2048, 2), Perturbation::zero(), r);
    REQUIRE(t.stop_reason == StopReason::escaped);
    CHECK(t.k_stop >= previous);
    previous = t.k_stop;
  }
  CHECK_THROWS_AS(integrate(field, make_spec(1, 64, 1), Perturbation::zero(), 0.5), ValidationError);
}

TEST_CASE("perturbations") {
  CHECK(Perturbation::constant(-0.25).eps_max() == 0.25);
  CHECK(Perturbation::zero().eps_max() == 0.0);
  const auto s = Perturbation::sampled({0.1, -0.3, 0.2}, 1);
  CHECK(s.eps_max() == 0.3);
  CHECK(s.at(1, 0) == -0.3);
  CHECK(s.at(99, 0) == 0.0);

  const auto rule = PerturbationRule::parse("rand:0.01:7");
  double previous = kInf;
  for (int level = 0; level < 5; ++level) {
    const auto p = rule.realize(level, 4096, 1);
    CHECK(p.eps_max() <= std::ldexp(0.01, -level));
    CHECK(p.eps_max() <= previous);
    previous = p.eps_max();
  }
  const auto a = rule.realize(3, 1000, 2), b = rule.realize(3, 1000, 2);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK(PerturbationRule::parse("const:1e-3").realize(4, 10, 1).at(5, 0) == 1e-3);
  CHECK(PerturbationRule::parse("zero").describe() == "zero");
  CHECK(PerturbationRule::parse("const:0.5").describe() == "const:0.5");
  CHECK_THROWS_AS(PerturbationRule::parse("bogus"), ValidationError);
  CHECK_THROWS_AS(PerturbationRule::parse("const:x"), ValidationError);
}

TEST_CASE("stop reasons") {
  const auto nf = integrate(expr::parse("exp(exp(y))", 1), make_spec(10, 64, 1), Perturbation::zero(), kInf);
  CHECK(nf.stop_reason == StopReason::non_finite);
  const auto dom = integrate(expr::parse("-1/sqrt(y)", 1), make_spec(0.01, 64, 1), Perturbation::zero(), 1e6);
  CHECK(dom.stop_reason == StopReason::domain_error);
  CHECK(!dom.fault.empty());
}

TEST_CASE("trajectory CSV") {
  const auto t = integrate(expr::parse("1; 2", 2), [] {
    GridSpec s;
    s.y0 = {0, 0};
    s.n0 = 2;
    s.t_max = 1;
    return s;
  }(), Perturbation::zero(), 1e6);
  std::ostringstream os;
  t.write_csv(os);
  CHECK(os.str() == "k,x,y0,y1\n0,0,0,0\n1,0.5,0.5,1\n2,1,1,2\n");
}

TEST_CASE("interpolation inside and outside the orbit") {
  const auto t = integrate(expr::parse("1", 1), make_spec(0, 4, 1), Perturbation::zero(), 1e6);
  double v = 0;
  CHECK(t.value_at(0.375, std::span<double>(&v, 1)));
  CHECK(v == 0.375);
  CHECK(!t.value_at(1.5, std::span<double>(&v, 1)));
  CHECK(!t.value_at(-0.1, std::span<double>(&v, 1)));
}

TEST_CASE("bound certificate") {
  const auto zero = integrate(expr::parse("0", 1), make_spec(0, 256, 1), Perturbation::zero(), 1e6);
  const auto c0 = check_bound(zero, 0, expr::parse("0", 1));
  CHECK(c0.satisfied);
  CHECK(c0.m >= 0.0);

  const auto field = expr::parse("y", 1);
  const auto exp_traj = integrate(field, make_spec(1, 4096, 1), Perturbation::zero(), 1e6);
  const auto c1 = check_bound(exp_traj, 0, field);
  CHECK(c1.satisfied);
  // |F| = |y| on [0, 1] x [0, 2] peaks at 2; the certificate's M inflates it.
  CHECK(c1.m == doctest::Approx(2.1));
  CHECK(c1.e == doctest::Approx(1.0 / 3.1));
  CHECK(!c1.backward_checked);

  const auto mid = check_bound(exp_traj, 2048, field);
  CHECK(mid.satisfied);
  CHECK(mid.backward_checked);
  CHECK(mid.first_index < 2048);

  // Understated field bound: the orbit leaves the rectangle before e.
  const auto ric = expr::parse("y*y", 1);
  const auto rt = integrate(ric, make_spec(1, 4096, 2), Perturbation::zero(), 1e6);
  BoundOptions o;
  o.m_override = 0.5;
  o.e_override = 0.2;
  const auto bad = check_bound(rt, 3277, ric, o);  // x ~ 0.8, y ~ 5
  CHECK(!bad.satisfied);
  REQUIRE(bad.violating_index.has_value());
  CHECK(*bad.violating_index >= bad.first_index);
  CHECK(*bad.violating_index <= bad.last_index);
  CHECK(*bad.violating_index != 3277);
}
