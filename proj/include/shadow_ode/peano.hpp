#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "shadow_ode/expr.hpp"
#include "shadow_ode/grid.hpp"
#include "shadow_ode/shadow.hpp"

namespace shadow_ode::peano {

struct SolveOptions {
  std::uint64_t n0 = 1024;
  /// J: levels N0 * 2^j for j = 0..J.
  int refinements = 8;
  double t_max = 2.0;
  double tol = 1e-4;
  /// Query spacing, a power of two.
  double spacing = 0x1p-7;
  /// R_0; level j escapes beyond R_0 * 4^j.
  double escape_radius = 1e6;
  grid::PerturbationRule rule;
  bool two_sided = false;
  /// Bisection passes on the domain boundary after closing (0 = midpoint estimate only).
  int refine_passes = 0;

  void validate() const;
};

/// Integrates every ladder level (in parallel) with the rule realized per level.
/// Throws DomainError when any level hits a domain fault.
shadow::RefinementLadder build_ladder(const expr::VectorField& field, double x0, std::span<const double> y0,
                                      const SolveOptions& options, int direction = 1);

/// Global solution through (x0, y0) for the configured perturbation rule: build the ladder,
/// extract the shadow table and close it. With two_sided the mirrored backward ladder
/// supplies the left part of the domain.
shadow::Solution solve_global(const expr::VectorField& field, double x0, std::span<const double> y0,
                              const SolveOptions& options);

struct ResidualOptions {
  std::uint64_t seed = 0x5eedULL;
  double quad_tol = 1e-3;
};

/// max over random sample pairs x < z of |Y(z) - Y(x) - int_x^z F(t, Y(t)) dt|_inf, the
/// integral taken by certified Riemann sums over the interpolated solution.
double residual_check(const shadow::Solution& solution, const expr::VectorField& field, std::size_t pair_count,
                      const ResidualOptions& options = {});

}  // namespace shadow_ode::peano
