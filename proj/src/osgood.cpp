#include "shadow_ode/osgood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shadow_ode/error.hpp"
#include "shadow_ode/format.hpp"
#include "shadow_ode/parallel.hpp"

namespace shadow_ode::osgood {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

shadow::Solution solve_signed(const expr::VectorField& field, double x0, double y0, double eps,
                              const peano::SolveOptions& options) {
  peano::SolveOptions o = options;
  o.rule.rule = grid::ConstantRule{eps};
  const double ys[1] = {y0};
  return peano::solve_global(field, x0, ys, o);
}

/// Calls fn(x, a, b) for every sample abscissa of `a` that `b` also has.
template <class Fn>
void for_common(const shadow::Solution& a, const shadow::Solution& b, Fn&& fn) {
  for (const auto& s : a.samples) {
    if (const auto* t = b.sample_at(s.x)) fn(s.x, s.y[0], t->y[0]);
  }
}

ExtremalSolution extremal(const expr::VectorField& field, double x0, double y0, const OsgoodOptions& osgood,
                          const peano::SolveOptions& options, Extremum kind) {
  if (field.dim() != 1) throw SystemsUnsupported("extremal solutions are defined for scalar problems");
  if (!(osgood.eps0 > 0.0) || !std::isfinite(osgood.eps0)) throw ValidationError("eps0 must be positive");
  if (osgood.j_eps < 3) throw InsufficientLadder("J_eps must be at least 3");
  if (osgood.max_segments == 0) throw ValidationError("segment cap must be positive");
  options.validate();

  const double sign = kind == Extremum::maximal ? 1.0 : -1.0;
  const double tol = options.tol;
  const std::size_t count = static_cast<std::size_t>(osgood.j_eps) + 1;

  ExtremalSolution out;
  out.kind = kind;
  out.domination_margin = std::numeric_limits<double>::infinity();
  out.cauchy_gaps.assign(count - 1, 0.0);

  double xs = x0;
  double ys = y0;
  const double horizon = x0 + options.t_max;
  while (true) {
    if (out.segments.size() == osgood.max_segments) {
      out.not_globally_resolved = true;
      break;
    }
    peano::SolveOptions seg = options;
    seg.t_max = horizon - xs;
    seg.two_sided = false;

    EpsilonLadder ladder;
    ladder.eps_values.resize(count);
    ladder.members.resize(count);
    for (std::size_t j = 0; j < count; ++j) ladder.eps_values[j] = std::ldexp(osgood.eps0, -static_cast<int>(j));
    parallel_for(count, [&](std::size_t j) {
      peano::SolveOptions member = seg;
      member.n0 = member_n0(ladder.eps_values[j], osgood, seg);
      ladder.members[j] = solve_signed(field, xs, ys, sign * ladder.eps_values[j], member);
    });

    for (std::size_t j = 0; j + 1 < count; ++j) {
      double gap = 0.0;
      for_common(ladder.members[j], ladder.members[j + 1], [&](double x, double uj, double un) {
        gap = std::max(gap, std::abs(uj - un));
        if (sign * (uj - un) < -kMonotoneSlack * tol) {
          throw LadderNonMonotone("superequation ladder not monotone at x=" + format_double(x) + " between eps=" +
                                  format_double(ladder.eps_values[j]) + " and eps=" +
                                  format_double(ladder.eps_values[j + 1]));
        }
      });
      out.cauchy_gaps[j] = std::max(out.cauchy_gaps[j], gap);
    }

    const auto& top = ladder.members[count - 1];
    const auto& prev = ladder.members[count - 2];
    // Contiguous converged run from the segment start.
    std::size_t run = 0;
    for (const auto& s : top.samples) {
      const auto* p = prev.sample_at(s.x);
      if (p == nullptr || !(std::abs(s.y[0] - p->y[0]) <= tol)) break;
      ++run;
    }
    if (run == 0) throw NoConvergence("superequation ladder does not converge at the segment start");

    const bool first = out.segments.empty();
    if (first) {
      out.base = top;
      out.base.samples.clear();
      out.base.frontier.clear();
    }
    const std::size_t skip = first ? 0 : 1;  // junction sample already present
    for (std::size_t i = skip; i < run; ++i) out.base.samples.push_back(top.samples[i]);
    out.segments.push_back({xs, ys, top.samples[run - 1].x});

    for (const auto& member : ladder.members) {
      for (std::size_t i = 0; i < run; ++i) {
        const auto* s = member.sample_at(top.samples[i].x);
        if (s != nullptr) out.domination_margin = std::min(out.domination_margin, sign * (s->y[0] - top.samples[i].y[0]));
      }
    }

    out.base.a_est = top.a_est;
    out.base.blow_up = top.blow_up;
    out.base.reached_horizon = top.reached_horizon;
    out.base.upper_bracket_lo = top.upper_bracket_lo;
    out.base.upper_bracket_hi = top.upper_bracket_hi;
    out.base.certificate.max_err_est = std::max(out.base.certificate.max_err_est, top.certificate.max_err_est);

    if (run == top.samples.size()) {
      // The ladder converged on the whole certified part of u_J: the domain ends here.
      out.base.frontier = top.frontier;
      break;
    }
    if (run == 1) {
      out.not_globally_resolved = true;
      break;
    }
    xs = top.samples[run - 1].x;
    ys = top.samples[run - 1].y[0];
  }

  out.base.x0 = x0;
  out.base.a_lower = x0;
  out.base.provenance = std::string(kind == Extremum::maximal ? "maximal" : "minimal") +
                        " eps0=" + format_double(osgood.eps0) + " J_eps=" + std::to_string(osgood.j_eps);
  return out;
}

Domination compare(const shadow::Solution& upper, const shadow::Solution& candidate, double tol, double sign) {
  Domination d;
  d.worst_gap = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& s : upper.samples) {
    const auto* c = candidate.sample_at(s.x);
    if (c == nullptr) continue;
    any = true;
    for (std::size_t i = 0; i < s.y.size(); ++i) d.worst_gap = std::min(d.worst_gap, sign * (s.y[i] - c->y[i]));
  }
  if (!any) {
    d.worst_gap = kNaN;
    return d;
  }
  d.dominates = d.worst_gap >= -kMonotoneSlack * tol;
  return d;
}

}  // namespace

std::uint64_t member_n0(double eps, const OsgoodOptions& osgood, const peano::SolveOptions& options) {
  std::uint64_t n0 = options.n0;
  if (!(osgood.resolution > 0.0)) return n0;
  const double needed = osgood.resolution / eps;  // N_{J-2} must reach this
  while (n0 < osgood.max_n0 && std::ldexp(static_cast<double>(n0), options.refinements - 2) < needed) n0 <<= 1;
  return n0;
}

shadow::Solution solve_super(const expr::VectorField& field, double x0, std::span<const double> y0, double eps,
                             const peano::SolveOptions& options) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ValidationError("superequation eps must be non-negative");
  peano::SolveOptions o = options;
  o.rule.rule = grid::ConstantRule{eps};
  return peano::solve_global(field, x0, y0, o);
}

ExtremalSolution maximal(const expr::VectorField& field, double x0, double y0, const OsgoodOptions& osgood,
                         const peano::SolveOptions& options) {
  return extremal(field, x0, y0, osgood, options, Extremum::maximal);
}

ExtremalSolution minimal(const expr::VectorField& field, double x0, double y0, const OsgoodOptions& osgood,
                         const peano::SolveOptions& options) {
  return extremal(field, x0, y0, osgood, options, Extremum::minimal);
}

Domination domination_check(const ExtremalSolution& extremal, const shadow::Solution& candidate, double tol) {
  return compare(extremal.base, candidate, tol, extremal.kind == Extremum::maximal ? 1.0 : -1.0);
}

Domination domination_check(const shadow::Solution& upper, const shadow::Solution& candidate, double tol) {
  return compare(upper, candidate, tol, 1.0);
}

}  // namespace shadow_ode::osgood
