#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shadow_ode/expr.hpp"
#include "shadow_ode/grid.hpp"

namespace shadow_ode::shadow {

/// Euler orbits at N_j = N_0 * 2^j, j = 0..J, standing in for one unlimited N.
struct RefinementLadder {
  std::vector<grid::EulerTrajectory> levels;
  /// R_j, strictly increasing.
  std::vector<double> escape_radii;

  double x0() const { return levels.front().spec.x0; }
  int direction() const { return levels.front().spec.direction; }
  std::size_t dim() const { return levels.front().dim; }
  double t_max() const { return levels.front().spec.t_max; }
  /// Checks N doubling, increasing radii, shared origin and direction.
  void validate() const;
};

enum class QueryStatus {
  converged,  // Cauchy test passed at tol
  bounded,    // finite and contracting across the top levels, not yet within tol
  diverged,   // escaped at some level and still growing
  undefined,
};

const char* to_string(QueryStatus status);

/// Ratio |v_J - v_{J-1}| / |v_{J-1} - v_{J-2}| below which a finite query counts as bounded.
inline constexpr double kContractionLimit = 0.75;

struct QueryRow {
  double q = 0.0;
  /// levels * dim values; +inf where the orbit escaped before q, NaN where it never reached q.
  std::vector<double> values;
  QueryStatus status = QueryStatus::undefined;
  /// |v_J - v_{J-1}|_inf (+inf when either is not finite).
  double err_est = 0.0;
  /// First level that escaped or exceeded its radius, -1 if none.
  int diverged_level = -1;

  std::span<const double> level_value(std::size_t level, std::size_t dim) const {
    return {values.data() + level * dim, dim};
  }
  bool limited() const { return status == QueryStatus::converged || status == QueryStatus::bounded; }
};

/// Finite stand-in for the standard part on a dyadic query grid.
struct ShadowTable {
  double x0 = 0.0;
  int direction = 1;
  double spacing = 0.0;
  double tol = 0.0;
  double t_max = 0.0;
  std::size_t dim = 0;
  std::size_t levels = 0;
  std::uint64_t n0 = 0;
  std::vector<double> escape_radii;
  std::vector<QueryRow> rows;
};

/// Classifies a single abscissa against the ladder.
QueryRow classify(const RefinementLadder& ladder, double q, double tol);

/// Queries q_i = x0 + dir*i*spacing on [0, t_max]. Throws InsufficientLadder when J < 3.
ShadowTable extract(const RefinementLadder& ladder, double spacing, double tol);

struct Sample {
  double x = 0.0;
  std::vector<double> y;
  double err_est = 0.0;
};

struct SolutionCertificate {
  /// Observed convergence order across the ladder; NaN when too few samples.
  double order = 0.0;
  double max_err_est = 0.0;
  std::size_t levels = 0;
  double tol = 0.0;
  std::uint64_t n0 = 0;
};

/// Certified continuous limit of a ladder: samples of the connected component of the
/// converged queries that contains x0, plus domain and blow-up estimates.
struct Solution {
  expr::VectorField field;
  double x0 = 0.0;
  double spacing = 0.0;

  /// Right end of the domain (x0 + t_max when the horizon was reached).
  double a_est = 0.0;
  bool blow_up = false;
  bool reached_horizon = false;
  /// Left end; equal to x0 unless the solution is two-sided.
  double a_lower = 0.0;
  bool blow_up_lower = false;
  bool reached_horizon_lower = false;

  /// Ascending in x, spacing apart.
  std::vector<Sample> samples;
  /// Queries past the certified samples where the ladder stays finite and contracting
  /// but has not met tol. Ascending in x.
  std::vector<Sample> frontier;

  SolutionCertificate certificate;
  std::string provenance;

  /// Last limited / first non-limited abscissa on each side (NaN when the horizon was reached).
  double upper_bracket_lo = 0.0;
  double upper_bracket_hi = 0.0;
  double lower_bracket_lo = 0.0;
  double lower_bracket_hi = 0.0;

  double domain_left() const { return a_lower; }
  double first_x() const { return samples.front().x; }
  double last_x() const { return samples.back().x; }
  bool covers(double x) const;
  /// Linear interpolation between samples; x must lie in [first_x, last_x].
  void value_at(double x, std::span<double> out) const;
  std::vector<double> value_at(double x) const;
  /// Sample with abscissa exactly x, if any.
  const Sample* sample_at(double x) const;

  /// "q,y0,...,y{n-1},err_est" preceded by one "# {json}" header line.
  void write_csv(std::ostream& os) const;
  /// The JSON header object: a_est, blow_up, order, tol, levels, ...
  std::string header_json() const;
};

/// Maximal Converged prefix, domain and blow-up estimate. Throws OriginDiverged.
Solution close(const ShadowTable& table);

/// Median over Converged queries of log2(|v_{J-1}-v_{J-2}| / |v_J-v_{J-1}|); +inf when all
/// deltas vanish. Throws TooFewSamples below 3 levels or 5 Converged queries.
double estimate_order(const ShadowTable& table);

/// Bisects the gap between the last limited and first non-limited query to sharpen the
/// domain endpoint on the ladder's side. Stops once the bracket is narrower than h_0.
void refine_boundary(const RefinementLadder& ladder, Solution& solution, int passes);

/// Sup-norm distance between two solutions over their common sample abscissas
/// (+inf when they share none).
double sup_distance(const Solution& a, const Solution& b);

}  // namespace shadow_ode::shadow
