#include "shadow_ode/peano.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "shadow_ode/error.hpp"
#include "shadow_ode/parallel.hpp"
#include "shadow_ode/quad.hpp"

namespace shadow_ode::peano {

namespace {

bool is_dyadic_power(double v) {
  int exp = 0;
  return v > 0.0 && std::isfinite(v) && std::frexp(v, &exp) == 0.5;
}

}  // namespace

void SolveOptions::validate() const {
  if (!grid::is_power_of_two(n0)) throw ValidationError("N0 must be a power of two");
  if (refinements < 3) throw InsufficientLadder("J must be at least 3");
  if (refinements > 30) throw ValidationError("J is unreasonably large");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ValidationError("T_max must be positive and finite");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (!is_dyadic_power(spacing)) throw ValidationError("query spacing must be a power of two");
  if (spacing * static_cast<double>(n0) < 1.0) throw ValidationError("query spacing must be at least 1/N0");
  if (!(escape_radius > 0.0)) throw ValidationError("escape radius must be positive");
  if (refine_passes < 0) throw ValidationError("refine passes must be non-negative");
}

shadow::RefinementLadder build_ladder(const expr::VectorField& field, double x0, std::span<const double> y0,
                                      const SolveOptions& options, int direction) {
  options.validate();
  if (y0.size() != field.dim()) throw DimensionMismatch(field.dim(), y0.size());
  const std::size_t count = static_cast<std::size_t>(options.refinements) + 1;
  shadow::RefinementLadder ladder;
  ladder.levels.resize(count);
  ladder.escape_radii.resize(count);
  for (std::size_t j = 0; j < count; ++j) ladder.escape_radii[j] = std::ldexp(options.escape_radius, 2 * static_cast<int>(j));

  parallel_for(count, [&](std::size_t j) {
    grid::GridSpec spec;
    spec.x0 = x0;
    spec.y0.assign(y0.begin(), y0.end());
    spec.n0 = options.n0;
    spec.level = static_cast<int>(j);
    spec.t_max = options.t_max;
    spec.direction = direction;
    const auto pert = options.rule.realize(spec.level, spec.k_max(), field.dim());
    ladder.levels[j] = grid::integrate(field, spec, pert, ladder.escape_radii[j]);
  });

  for (const auto& level : ladder.levels) {
    if (level.stop_reason == grid::StopReason::domain_error) {
      throw DomainError("level N=" + std::to_string(level.spec.n()) + ": " + level.fault,
                        static_cast<std::int64_t>(level.k_stop));
    }
  }
  return ladder;
}

shadow::Solution solve_global(const expr::VectorField& field, double x0, std::span<const double> y0,
                              const SolveOptions& options) {
  const auto forward_ladder = build_ladder(field, x0, y0, options, 1);
  auto forward = shadow::close(shadow::extract(forward_ladder, options.spacing, options.tol));
  if (options.refine_passes > 0) shadow::refine_boundary(forward_ladder, forward, options.refine_passes);
  forward.field = field;
  forward.provenance = options.rule.describe();
  if (!options.two_sided) return forward;

  const auto backward_ladder = build_ladder(field, x0, y0, options, -1);
  auto backward = shadow::close(shadow::extract(backward_ladder, options.spacing, options.tol));
  if (options.refine_passes > 0) shadow::refine_boundary(backward_ladder, backward, options.refine_passes);

  shadow::Solution both = forward;
  both.samples.assign(backward.samples.begin(), backward.samples.end() - 1);  // x0 appears in both halves
  both.samples.insert(both.samples.end(), forward.samples.begin(), forward.samples.end());
  both.frontier = backward.frontier;
  both.frontier.insert(both.frontier.end(), forward.frontier.begin(), forward.frontier.end());
  both.a_lower = backward.a_lower;
  both.blow_up_lower = backward.blow_up_lower;
  both.reached_horizon_lower = backward.reached_horizon_lower;
  both.lower_bracket_lo = backward.lower_bracket_lo;
  both.lower_bracket_hi = backward.lower_bracket_hi;
  both.certificate.max_err_est = std::max(forward.certificate.max_err_est, backward.certificate.max_err_est);
  both.provenance = options.rule.describe() + " (two-sided)";
  return both;
}

double residual_check(const shadow::Solution& solution, const expr::VectorField& field, std::size_t pair_count,
                      const ResidualOptions& options) {
  const std::size_t n = solution.samples.size();
  if (n < 2) throw ValidationError("residual check needs at least two samples");
  const std::size_t dim = field.dim();
  std::mt19937_64 rng(options.seed);
  std::vector<double> y(dim), f(dim);
  double worst = 0.0;
  for (std::size_t p = 0; p < pair_count; ++p) {
    std::size_t i = static_cast<std::size_t>(rng() % n);
    std::size_t j = static_cast<std::size_t>(rng() % (n - 1));
    if (j >= i) ++j;
    if (i > j) std::swap(i, j);
    const auto& left = solution.samples[i];
    const auto& right = solution.samples[j];
    for (std::size_t c = 0; c < dim; ++c) {
      auto integrand = [&](double t) {
        solution.value_at(t, y);
        const expr::EvalResult r = field.evaluate(t, y, f);
        if (r.status == expr::EvalStatus::domain_error) throw DomainError(std::string(r.detail));
        if (r.status == expr::EvalStatus::overflow) return std::numeric_limits<double>::infinity();
        return f[c];
      };
      const auto integral = quad::integrate_certified(integrand, left.x, right.x, options.quad_tol);
      const double residual = std::abs(right.y[c] - left.y[c] - integral.value);
      worst = std::max(worst, residual);
    }
  }
  return worst;
}

}  // namespace shadow_ode::peano
