#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shadow_ode/expr.hpp"
#include "shadow_ode/grid.hpp"
#include "shadow_ode/peano.hpp"
#include "shadow_ode/shadow.hpp"

namespace shadow_ode::perturb {

/// Closed-form solution y on [x0, c] together with its derivative, both as expressions in x.
struct KnownSolution {
  std::vector<expr::Expression> y;
  std::vector<expr::Expression> y_prime;
  double x0 = 0.0;
  double c = 1.0;

  /// Parses ';'-separated component lists over the variable x.
  static KnownSolution parse(const std::string& y_text, const std::string& y_prime_text, double x0, double c);

  std::size_t dim() const { return y.size(); }
  std::vector<double> value(double x) const;
  std::vector<double> derivative(double x) const;

  /// Sanity gate: y' = F(x, y) within 1e-10 * max(1, |y'|) at 100 probes of [x0, c].
  /// Throws ValidationError naming the first bad probe.
  void check_against(const expr::VectorField& field) const;
};

/// Mean-value perturbation realizing `known` on the grid: t_k is the leftmost root of
/// y'(t) = (y(x_{k+1}) - y(x_k)) / h in [x_k, x_{k+1}] and eps_k = F(t_k, y(t_k)) - F(x_k, y(x_k)).
/// Steps that end past c get eps_k = 0 and t_k = NaN. Scalar problems only.
grid::Perturbation recover(const expr::VectorField& field, const KnownSolution& known, const grid::GridSpec& spec);

/// Reruns the recursion with the recovered sequence; max_k |y_k - y(x_k)|_inf over x_k <= c.
double verify_roundtrip(const expr::VectorField& field, const KnownSolution& known,
                        const grid::Perturbation& recovered, const grid::GridSpec& spec);

struct FunnelMember {
  grid::PerturbationRule rule;
  shadow::Solution solution;
  std::size_t cluster = 0;
};

struct Funnel {
  std::vector<FunnelMember> members;
  std::size_t cluster_count = 0;
};

/// One global solution per rule; members whose sup distance is <= 3*tol are linked into
/// the same cluster (single linkage). Cluster ids follow the order of first appearance.
Funnel funnel(const expr::VectorField& field, double x0, const std::vector<double>& y0,
              const std::vector<grid::PerturbationRule>& rules, const peano::SolveOptions& options);

}  // namespace shadow_ode::perturb
