#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "shadow_ode/error.hpp"
#include "shadow_ode/expr.hpp"

using namespace shadow_ode;
using namespace shadow_ode::expr;

namespace {

std::vector<double> at(const VectorField& f, double x, std::vector<double> y) { return eval(f, x, y).values; }

double scalar(const std::string& text, double x) { return eval_scalar(parse_expression(text, scalar_variables()), x); }

}  // namespace

TEST_CASE("parse and evaluate the basic examples") {
  CHECK(at(parse("0", 1), 3.5, {-2.0})[0] == 0.0);
  CHECK(at(parse("y*y", 1), 0.0, {1.0})[0] == 1.0);
  CHECK(at(parse("2*sqrt(abs(y))", 1), 0.5, {0.25})[0] == 1.0);
  CHECK(at(parse("y", 1), 3.0, {2.0})[0] == 2.0);
  const auto two = at(parse("y1; x+y0*y1", 2), 1.0, {2.0, 3.0});
  CHECK(two[0] == 3.0);
  CHECK(two[1] == 7.0);
}

TEST_CASE("variables and aliases") {
  CHECK(at(parse("t + y0", 1), 2.0, {5.0})[0] == 7.0);
  CHECK_THROWS_AS(parse("x", 3), DimensionMismatch);
  CHECK(parse("1;2;3", 3).declared_vars() == std::vector<std::string>{"x", "y0", "y1", "y2"});
  CHECK_THROWS_AS(parse("y", 2), UnknownIdentifier);  // "y" only aliases y0 in the scalar case
  CHECK_THROWS_AS(parse("z", 1), UnknownIdentifier);
  CHECK(parse_expression("y1 + x*x", field_variables(2)).free_vars() == std::vector<std::string>{"y1", "x"});
}

TEST_CASE("precedence and associativity") {
  CHECK(scalar("2+3*4", 0) == 14.0);
  CHECK(scalar("(2+3)*4", 0) == 20.0);
  CHECK(scalar("2^3^2", 0) == 512.0);
  CHECK(scalar("-2^2", 0) == -4.0);
  CHECK(scalar("2^-1", 0) == 0.5);
  CHECK(scalar("8/4/2", 0) == 1.0);
  CHECK(scalar("8-4-2", 0) == 2.0);
  CHECK(scalar("--3", 0) == 3.0);
  CHECK(scalar("1.5e2 + 2E-1", 0) == 150.2);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10, 10);
  const auto vars = field_variables(2);
  const auto lhs = parse_expression("x+y0*y1", vars);
  const auto rhs = parse_expression("x+(y0*y1)", vars);
  for (int i = 0; i < 200; ++i) {
    const double s[3] = {u(rng), u(rng), u(rng)};
    double a = 0, b = 0;
    lhs.evaluate(s, a);
    rhs.evaluate(s, b);
    CHECK(a == b);
  }
}

TEST_CASE("functions and constants") {
  CHECK(scalar("sin(pi/2)", 0) == doctest::Approx(1.0));
  CHECK(scalar("cos(0)", 0) == 1.0);
  CHECK(scalar("tan(0)", 0) == 0.0);
  CHECK(scalar("log(e)", 0) == doctest::Approx(1.0));
  CHECK(scalar("exp(x)", 1.0) == std::exp(1.0));
  CHECK(scalar("sign(-3) + sign(0) + sign(2)", 0) == 0.0);
  CHECK(scalar("pow(2, 10)", 0) == 1024.0);
  CHECK(scalar("min(3, -1) + max(3, -1)", 0) == 2.0);
  CHECK(scalar("abs(x)^(2/3)", -8.0) == doctest::Approx(4.0));
  CHECK(scalar("(-8)^3", 0) == -512.0);
}

TEST_CASE("syntax errors carry offsets and expectations") {
  try {
    parse("2x", 1);
    FAIL("implicit multiplication must be rejected");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 1);
    CHECK(!e.expected().empty());
  }
  try {
    parse("y + ", 1);
    FAIL("dangling operator");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 4);
  }
  try {
    parse("1; foo", 2);
    FAIL("unknown identifier");
  } catch (const UnknownIdentifier& e) {
    CHECK(e.offset() == 3);
    CHECK(e.name() == "foo");
  }
  CHECK_THROWS_AS(parse("sin(1, 2)", 1), ArityMismatch);
  CHECK_THROWS_AS(parse("pow(1)", 1), ArityMismatch);
  CHECK_THROWS_AS(parse("(1", 1), SyntaxError);
  CHECK_THROWS_AS(parse("1)", 1), SyntaxError);
  CHECK_THROWS_AS(parse("+1", 1), SyntaxError);
  CHECK_THROWS_AS(parse("", 1), SyntaxError);
  CHECK_THROWS_AS(parse("1;2", 1), DimensionMismatch);
}

TEST_CASE("domain errors and overflow") {
  const auto f = parse("log(y)", 1);
  CHECK_THROWS_AS(eval(f, 0, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(eval(parse("sqrt(y)", 1), 0, std::vector<double>{-1.0}), DomainError);
  CHECK_THROWS_AS(eval(parse("1/y", 1), 0, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(eval(parse("pow(y, 0.5)", 1), 0, std::vector<double>{-1.0}), DomainError);
  CHECK_THROWS_AS(eval(parse("0^(-1)", 1), 0, std::vector<double>{0.0}), DomainError);

  const auto big = eval(parse("exp(y)", 1), 0, std::vector<double>{1000.0});
  CHECK(big.status == EvalStatus::overflow);

  double out = 0;
  const double slots[1] = {-1.0};
  const auto r = parse_expression("log(x)", scalar_variables()).evaluate(slots, out);
  CHECK(r.status == EvalStatus::domain_error);
  CHECK(!r.detail.empty());
}

TEST_CASE("pretty-print round trip is structural identity") {
  const std::vector<std::string> corpus = {"0",
                                           "y*y",
                                           "2*sqrt(abs(y))",
                                           "3*abs(y)^(2/3)",
                                           "-x^2 + 3*(y - 1)/(x + 2)",
                                           "2^3^2",
                                           "(2^3)^2",
                                           "-(-y)",
                                           "pow(x, min(y, 2)) - max(sin(x), cos(y))",
                                           "1e-5 + 0.1 - 123.456e7",
                                           "a - (b - c)",
                                           "a / (b * c)",
                                           "-a * -b",
                                           "(-a)^2",
                                           "e * pi + sign(x) - tan(t)"};
  VariableTable vars = {{"x", 0}, {"t", 0}, {"y", 1}, {"a", 2}, {"b", 3}, {"c", 4}};
  for (const auto& text : corpus) {
    const auto first = parse_expression(text, vars);
    const auto second = parse_expression(first.to_string(), vars);
    INFO(text << " -> " << first.to_string());
    CHECK(structurally_equal(first.root(), second.root()));
    CHECK(second.to_string() == first.to_string());
  }
}

TEST_CASE("evaluation is referentially transparent") {
  const auto f = parse("sin(x)*exp(y0) - y1^3; y0/(1+x*x)", 2);
  std::vector<double> y = {0.3, -1.7};
  const auto a = at(f, 0.9, y);
  for (int i = 0; i < 10; ++i) CHECK(at(f, 0.9, y) == a);
  CHECK(f.to_string() == "sin(x)*exp(y0) - y1^3; y0/(1 + x*x)");
}
