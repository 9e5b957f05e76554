#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shadow_ode/expr.hpp"
#include "shadow_ode/peano.hpp"
#include "shadow_ode/shadow.hpp"

namespace shadow_ode::osgood {

/// Global solution of the superequation z' = F(x, z) + eps. Same code path as
/// solve_global with a constant perturbation. eps must be >= 0.
shadow::Solution solve_super(const expr::VectorField& field, double x0, std::span<const double> y0, double eps,
                             const peano::SolveOptions& options);

/// u_j for eps_j = eps0 * 2^-j on one continuation segment.
struct EpsilonLadder {
  std::vector<double> eps_values;
  std::vector<shadow::Solution> members;
};

struct Segment {
  double start_x = 0.0;
  double start_value = 0.0;
  /// Last query where |u_J - u_{J-1}| <= tol held contiguously from start_x.
  double end_x = 0.0;
};

enum class Extremum { maximal, minimal };

struct ExtremalSolution {
  Extremum kind = Extremum::maximal;
  shadow::Solution base;
  std::vector<Segment> segments;
  /// min over ladder members of sign * (u_j - y), sign = +1 for maximal and -1 for minimal.
  double domination_margin = 0.0;
  /// cauchy_gaps[j] = sup |u_{j+1} - u_j| over common samples, maximized over segments.
  std::vector<double> cauchy_gaps;
  /// The 64-segment continuation cap was hit or a restart made no progress.
  bool not_globally_resolved = false;
};

struct OsgoodOptions {
  double eps0 = 1e-2;
  int j_eps = 12;
  std::size_t max_segments = 64;
  /// Each member refines its N0 until h_{J-2} <= eps_j / resolution, so the grid step stays
  /// small against the perturbation. 0 keeps the caller's N0 for every member.
  double resolution = 2.0;
  /// Upper cap on the refined N0.
  std::uint64_t max_n0 = std::uint64_t{1} << 16;
};

/// N0 used for the ladder member with perturbation eps.
std::uint64_t member_n0(double eps, const OsgoodOptions& osgood, const peano::SolveOptions& options);

inline constexpr double kMonotoneSlack = 3.0;  // in units of tol

/// Maximal solution through (x0, y0): limit of the superequation ladder, glued across
/// restarts where the ladder stopped converging. Scalar problems only.
/// Throws LadderNonMonotone when u_j < u_{j+1} - 3*tol somewhere.
ExtremalSolution maximal(const expr::VectorField& field, double x0, double y0, const OsgoodOptions& osgood,
                         const peano::SolveOptions& options);

/// Mirror image through z' = F - eps.
ExtremalSolution minimal(const expr::VectorField& field, double x0, double y0, const OsgoodOptions& osgood,
                         const peano::SolveOptions& options);

struct Domination {
  bool dominates = false;
  /// min over common queries of sign * (extremal - candidate); NaN when none are shared.
  double worst_gap = 0.0;
};

/// dominates iff worst_gap >= -3*tol.
Domination domination_check(const ExtremalSolution& extremal, const shadow::Solution& candidate, double tol);
/// Plain check that `upper` lies above `candidate` on the common queries.
Domination domination_check(const shadow::Solution& upper, const shadow::Solution& candidate, double tol);

}  // namespace shadow_ode::osgood
