#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "shadow_ode/expr.hpp"

namespace shadow_ode::quad {

/// Bracketing of [a, b] on the line x_i = i*h, h = 1/n:
/// i_a*h - h < a <= i_a*h and i_b*h < b <= i_b*h + h.
struct RiemannSpec {
  double a = 0.0;
  double b = 0.0;
  std::uint64_t n = 1024;

  static RiemannSpec make(double a, double b, std::uint64_t n);

  double h() const;
  std::int64_t i_a() const;
  std::int64_t i_b() const;
};

using Integrand = std::function<double(double)>;

/// sum_{i=i_a}^{i_b} f(i*h)*h with compensated summation. A DomainError thrown by
/// the integrand is rethrown carrying the offending i.
double riemann_sum(const Integrand& f, const RiemannSpec& spec);
double riemann_sum(const expr::Expression& f, const RiemannSpec& spec);

struct QuadCertificate {
  std::vector<std::uint64_t> levels;  // N of every sum computed
  std::vector<double> deltas;         // |S_N - S_{N/2}| for levels[1..]

  /// Median of log2(delta_j / delta_{j+1}) over consecutive non-zero deltas;
  /// +inf when every delta is zero, NaN when fewer than two deltas exist.
  double order() const;
};

struct QuadResult {
  double value = 0.0;
  QuadCertificate certificate;
};

struct QuadOptions {
  int start_log2 = 4;
  int max_log2 = 24;
};

/// Doubles N until two consecutive deltas are <= tol/2 and returns the finest sum.
/// Throws NoConvergence past max_log2.
QuadResult integrate_certified(const Integrand& f, double a, double b, double tol, const QuadOptions& options = {});
QuadResult integrate_certified(const expr::Expression& f, double a, double b, double tol,
                               const QuadOptions& options = {});

}  // namespace shadow_ode::quad
