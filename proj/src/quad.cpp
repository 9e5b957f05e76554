#include "shadow_ode/quad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shadow_ode/error.hpp"
#include "shadow_ode/grid.hpp"

namespace shadow_ode::quad {

RiemannSpec RiemannSpec::make(double a, double b, std::uint64_t n) {
  if (!std::isfinite(a) || !std::isfinite(b) || a > b) throw ValidationError("integration bounds must satisfy a <= b");
  if (!grid::is_power_of_two(n)) throw ValidationError("N must be a power of two");
  return RiemannSpec{a, b, n};
}

double RiemannSpec::h() const { return 1.0 / static_cast<double>(n); }

// a*n and b*n are exact for power-of-two n, so the ceilings give the brackets exactly.
std::int64_t RiemannSpec::i_a() const { return static_cast<std::int64_t>(std::ceil(a * static_cast<double>(n))); }

std::int64_t RiemannSpec::i_b() const { return static_cast<std::int64_t>(std::ceil(b * static_cast<double>(n))) - 1; }

double riemann_sum(const Integrand& f, const RiemannSpec& spec) {
  const double h = spec.h();
  // Neumaier summation.
  double sum = 0.0;
  double comp = 0.0;
  for (std::int64_t i = spec.i_a(); i <= spec.i_b(); ++i) {
    double term = 0.0;
    try {
      term = f(static_cast<double>(i) * h) * h;
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (summation index " + std::to_string(i) + ")", i);
    }
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double riemann_sum(const expr::Expression& f, const RiemannSpec& spec) {
  return riemann_sum([&f](double x) { return expr::eval_scalar(f, x); }, spec);
}

double QuadCertificate::order() const {
  if (deltas.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> orders;
  bool all_zero = true;
  for (std::size_t j = 0; j + 1 < deltas.size(); ++j) {
    if (deltas[j] != 0.0 || deltas[j + 1] != 0.0) all_zero = false;
    if (deltas[j] > 0.0 && deltas[j + 1] > 0.0) orders.push_back(std::log2(deltas[j] / deltas[j + 1]));
  }
  if (all_zero) return std::numeric_limits<double>::infinity();
  if (orders.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(orders.begin(), orders.end());
  const std::size_t m = orders.size() / 2;
  return orders.size() % 2 == 1 ? orders[m] : 0.5 * (orders[m - 1] + orders[m]);
}

QuadResult integrate_certified(const Integrand& f, double a, double b, double tol, const QuadOptions& options) {
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (options.start_log2 < 0 || options.max_log2 < options.start_log2 || options.max_log2 > 40) {
    throw ValidationError("invalid quadrature level range");
  }
  QuadResult result;
  double previous = 0.0;
  int consecutive = 0;
  for (int lg = options.start_log2; lg <= options.max_log2; ++lg) {
    const std::uint64_t n = std::uint64_t{1} << lg;
    const double s = riemann_sum(f, RiemannSpec::make(a, b, n));
    if (!std::isfinite(s)) throw NoConvergence("Riemann sum is not finite at N = " + std::to_string(n));
    result.certificate.levels.push_back(n);
    if (result.certificate.levels.size() > 1) {
      const double delta = std::abs(s - previous);
      result.certificate.deltas.push_back(delta);
      consecutive = delta <= tol / 2 ? consecutive + 1 : 0;
    }
    previous = s;
    result.value = s;
    if (consecutive >= 2) return result;
  }
  throw NoConvergence("Riemann sums did not settle within tol " + std::to_string(tol) + " by N = 2^" +
                      std::to_string(options.max_log2));
}

QuadResult integrate_certified(const expr::Expression& f, double a, double b, double tol, const QuadOptions& options) {
  return integrate_certified([&f](double x) { return expr::eval_scalar(f, x); }, a, b, tol, options);
}

}  // namespace shadow_ode::quad
