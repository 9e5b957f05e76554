#include "shadow_ode/perturb.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "shadow_ode/error.hpp"
#include "shadow_ode/format.hpp"
#include "shadow_ode/parallel.hpp"

namespace shadow_ode::perturb {

namespace {

constexpr int kScanIntervals = 64;
constexpr int kBisectionDepth = 20;

std::vector<double> eval_all(const std::vector<expr::Expression>& fs, double x) {
  std::vector<double> out(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) out[i] = expr::eval_scalar(fs[i], x);
  return out;
}

double field_at(const expr::VectorField& field, double x, double y) {
  const double ys[1] = {y};
  const auto r = expr::eval(field, x, ys);
  return r.values[0];
}

bool beyond(double x, double c, int direction) { return direction > 0 ? x > c : x < c; }

}  // namespace

KnownSolution KnownSolution::parse(const std::string& y_text, const std::string& y_prime_text, double x0, double c) {
  KnownSolution k;
  const auto vars = expr::scalar_variables();
  const std::size_t count = static_cast<std::size_t>(std::count(y_text.begin(), y_text.end(), ';')) + 1;
  k.y = expr::parse_expression_list(y_text, vars, count);
  k.y_prime = expr::parse_expression_list(y_prime_text, vars, count);
  k.x0 = x0;
  k.c = c;
  if (!std::isfinite(x0) || !std::isfinite(c) || c == x0) throw ValidationError("known solution needs a non-empty domain");
  return k;
}

std::vector<double> KnownSolution::value(double x) const { return eval_all(y, x); }
std::vector<double> KnownSolution::derivative(double x) const { return eval_all(y_prime, x); }

void KnownSolution::check_against(const expr::VectorField& field) const {
  if (field.dim() != dim()) throw DimensionMismatch(field.dim(), dim());
  constexpr int kProbes = 100;
  for (int i = 0; i < kProbes; ++i) {
    const double x = x0 + (c - x0) * static_cast<double>(i) / (kProbes - 1);
    const auto yx = value(x);
    const auto dy = derivative(x);
    const auto f = expr::eval(field, x, yx);
    for (std::size_t j = 0; j < dim(); ++j) {
      const double scale = std::max(1.0, std::abs(dy[j]));
      if (!(std::abs(f.values[j] - dy[j]) <= 1e-10 * scale)) {
        throw ValidationError("known solution does not satisfy the field at x=" + format_double(x) + ": y'=" +
                              format_double(dy[j]) + " but F=" + format_double(f.values[j]));
      }
    }
  }
}

grid::Perturbation recover(const expr::VectorField& field, const KnownSolution& known, const grid::GridSpec& spec) {
  spec.validate();
  if (field.dim() != 1 || known.dim() != 1) {
    throw SystemsUnsupported("perturbation recovery needs a scalar problem (the mean value theorem has no vector form)");
  }
  if (spec.y0.size() != 1) throw DimensionMismatch(1, spec.y0.size());
  if (spec.x0 != known.x0) throw ValidationError("grid origin differs from the known solution's origin");
  const double yk0 = known.value(spec.x0)[0];
  if (std::abs(yk0 - spec.y0[0]) > 1e-12 * std::max(1.0, std::abs(yk0))) {
    throw ValidationError("known solution does not pass through the initial value");
  }

  const std::uint64_t k_max = spec.k_max();
  const double h = spec.h();
  const int dir = spec.direction;
  std::vector<double> eps(k_max, 0.0);
  std::vector<double> ts(k_max, std::numeric_limits<double>::quiet_NaN());
  const auto& yf = known.y[0];
  const auto& dyf = known.y_prime[0];

  for (std::uint64_t k = 0; k < k_max; ++k) {
    const double xk = spec.x(k);
    const double xn = spec.x(k + 1);
    if (beyond(xn, known.c, dir)) break;
    const double yk = expr::eval_scalar(yf, xk);
    const double yn = expr::eval_scalar(yf, xn);
    // Mean slope in the direction of travel; y'(t) is the same in both directions.
    const double slope = (yn - yk) / (xn - xk);
    auto g = [&](double t) { return expr::eval_scalar(dyf, t) - slope; };

    std::array<double, kScanIntervals + 1> gs{};
    for (int i = 0; i <= kScanIntervals; ++i) gs[i] = g(xk + dir * h * i / kScanIntervals);

    double t = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i <= kScanIntervals && std::isnan(t); ++i) {
      if (gs[i] == 0.0) {
        t = xk + dir * h * i / kScanIntervals;
      } else if (i < kScanIntervals && std::signbit(gs[i]) != std::signbit(gs[i + 1]) && gs[i + 1] != 0.0) {
        double lo = xk + dir * h * i / kScanIntervals;
        double hi = xk + dir * h * (i + 1) / kScanIntervals;
        double glo = gs[i];
        double ghi = gs[i + 1];
        for (int b = 0; b < kBisectionDepth - 6; ++b) {  // 64 = 2^6 already done by the scan
          const double mid = 0.5 * (lo + hi);
          const double gm = g(mid);
          if (gm == 0.0) {
            lo = hi = mid;
            glo = ghi = 0.0;
            break;
          }
          if (std::signbit(gm) == std::signbit(glo)) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
            ghi = gm;
          }
        }
        // A sign change that survives bisection undiminished is a jump of y', not a root.
        double variation = 0.0;
        for (int j = 0; j < kScanIntervals; ++j) variation = std::max(variation, std::abs(gs[j + 1] - gs[j]));
        const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(yk) + std::abs(yn)) / h;
        if (std::abs(ghi - glo) > rounding + 0x1p-8 * variation) {
          throw NoMeanValuePoint("y' jumps inside step " + std::to_string(k) + " at x=" + format_double(xk), k);
        }
        t = 0.5 * (lo + hi);
      }
    }
    if (std::isnan(t)) {
      // No bracketed sign change: accept the closest scan point when the miss is within the
      // rounding of the slope plus what y' can vary between two scan points.
      double variation = 0.0;
      for (int i = 0; i < kScanIntervals; ++i) variation = std::max(variation, std::abs(gs[i + 1] - gs[i]));
      const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(yk) + std::abs(yn)) / h;
      int best = 0;
      for (int i = 1; i <= kScanIntervals; ++i)
        if (std::abs(gs[i]) < std::abs(gs[best])) best = i;
      if (!(std::abs(gs[best]) <= rounding + variation)) {
        throw NoMeanValuePoint("no mean value point in step " + std::to_string(k) + " at x=" + format_double(xk), k);
      }
      t = xk + dir * h * best / kScanIntervals;
    }
    ts[k] = t;
    eps[k] = field_at(field, t, expr::eval_scalar(yf, t)) - field_at(field, xk, yk);
  }
  return grid::Perturbation::recorded(std::move(eps), std::move(ts));
}

double verify_roundtrip(const expr::VectorField& field, const KnownSolution& known,
                        const grid::Perturbation& recovered, const grid::GridSpec& spec) {
  const auto traj = grid::integrate(field, spec, recovered, std::numeric_limits<double>::infinity());
  double worst = 0.0;
  for (std::size_t row = 0; row < traj.stored(); ++row) {
    const double x = traj.x(traj.stored_step(row));
    if (beyond(x, known.c, spec.direction)) break;
    const auto yk = traj.stored_state(row);
    const auto exact = known.value(x);
    for (std::size_t i = 0; i < exact.size(); ++i) worst = std::max(worst, std::abs(yk[i] - exact[i]));
  }
  return worst;
}

Funnel funnel(const expr::VectorField& field, double x0, const std::vector<double>& y0,
              const std::vector<grid::PerturbationRule>& rules, const peano::SolveOptions& options) {
  if (rules.empty()) throw ValidationError("funnel needs at least one perturbation rule");
  Funnel out;
  out.members.resize(rules.size());
  parallel_for(rules.size(), [&](std::size_t i) {
    peano::SolveOptions o = options;
    o.rule = rules[i];
    out.members[i].rule = rules[i];
    out.members[i].solution = peano::solve_global(field, x0, y0, o);
  });

  // Union-find over the pairwise 3*tol relation.
  std::vector<std::size_t> parent(rules.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      if (shadow::sup_distance(out.members[i].solution, out.members[j].solution) <= 3.0 * options.tol) {
        parent[find(j)] = find(i);
      }
    }
  }
  std::vector<std::size_t> label(rules.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::size_t root = find(i);
    if (label[root] == static_cast<std::size_t>(-1)) label[root] = out.cluster_count++;
    out.members[i].cluster = label[root];
  }
  return out;
}

}  // namespace shadow_ode::perturb
