#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "shadow_ode/expr.hpp"

namespace shadow_ode::grid {

/// One fixed lattice x_k = x0 + k*h, h = 1/N, N = n0 * 2^level.
struct GridSpec {
  double x0 = 0.0;
  std::vector<double> y0;
  std::uint64_t n0 = 1024;
  int level = 0;
  double t_max = 1.0;
  /// Overrides the default budget min(N^2, ceil(t_max*N)) when set; still capped by N^2.
  std::optional<std::uint64_t> k_max_override;
  /// +1 integrates forward in x, -1 runs the mirrored backward recursion.
  int direction = 1;
  /// Keep every stride-th state. 0 selects automatically: 1 while k_max <= 2^21, else the
  /// smallest power of two keeping at most 2^21 rows.
  std::uint64_t stride = 0;

  std::uint64_t n() const;
  double h() const;
  std::uint64_t k_max() const;
  std::uint64_t effective_stride() const;
  /// Exact abscissa of step k.
  double x(std::uint64_t k) const { return x0 + static_cast<double>(direction) * static_cast<double>(k) * h(); }

  /// Throws ValidationError when n0 is not a power of two, t_max <= 0, etc.
  void validate() const;
};

bool is_power_of_two(std::uint64_t v);

/// Per-step additive deviation eps_k of the Euler recursion, realized on one grid.
class Perturbation {
 public:
  enum class Kind { zero, constant, sampled, recorded };

  Perturbation() = default;
  static Perturbation zero();
  static Perturbation constant(double c);
  /// values[k * dim + i] is eps_k for component i; steps beyond the sequence get 0.
  static Perturbation sampled(std::vector<double> values, std::size_t dim);
  /// Scalar recorded sequence with the mean-value abscissas t_k that produced it.
  static Perturbation recorded(std::vector<double> values, std::vector<double> abscissas);

  Kind kind() const noexcept { return kind_; }
  double at(std::uint64_t k, std::size_t component) const noexcept {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::constant: return constant_;
      default: {
        const std::uint64_t idx = k * dim_ + component;
        return idx < values_.size() ? values_[idx] : 0.0;
      }
    }
  }
  /// max_k |eps_k| over the realized sequence.
  double eps_max() const noexcept { return eps_max_; }
  double constant_value() const noexcept { return constant_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> abscissas() const noexcept { return abscissas_; }
  std::size_t steps() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::zero;
  double constant_ = 0.0;
  std::size_t dim_ = 1;
  std::vector<double> values_;
  std::vector<double> abscissas_;
  double eps_max_ = 0.0;
};

struct ZeroRule {};
struct ConstantRule {
  double value = 0.0;
};
/// Pseudo-random eps_k uniform in [-amplitude * 2^-level, amplitude * 2^-level].
struct RandomRule {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

/// Recipe that produces a Perturbation for each ladder level.
struct PerturbationRule {
  std::variant<ZeroRule, ConstantRule, RandomRule> rule;

  /// "zero", "const:<v>", "rand:<amplitude>:<seed>"
  static PerturbationRule parse(const std::string& descriptor);
  std::string describe() const;
  Perturbation realize(int level, std::uint64_t k_max, std::size_t dim) const;
};

enum class StopReason { budget_exhausted, escaped, non_finite, domain_error };

const char* to_string(StopReason reason);

/// One discrete orbit (x_k, y_k), k = 0..k_stop.
class EulerTrajectory {
 public:
  GridSpec spec;
  Perturbation perturbation;
  std::size_t dim = 0;
  std::uint64_t k_stop = 0;
  StopReason stop_reason = StopReason::budget_exhausted;
  double escape_radius = 0.0;
  /// Domain fault description when stop_reason == domain_error.
  std::string fault;

  std::uint64_t stride() const noexcept { return stride_; }
  /// Number of stored states.
  std::size_t stored() const noexcept { return steps_.size(); }
  std::uint64_t stored_step(std::size_t row) const noexcept { return steps_[row]; }
  std::span<const double> stored_state(std::size_t row) const noexcept {
    return {states_.data() + row * dim, dim};
  }
  /// Row of step k, if stored.
  std::optional<std::size_t> row_of(std::uint64_t k) const noexcept;
  std::span<const double> y(std::uint64_t k) const;
  double x(std::uint64_t k) const { return spec.x(k); }

  /// Linear interpolation between stored states at abscissa q. False when q lies
  /// outside [x_0, x_{k_stop}] (in the direction of integration).
  bool value_at(double q, std::span<double> out) const;

  /// Rows of (k, x, y...) for the CSV dump.
  void write_csv(std::ostream& os) const;

 private:
  friend EulerTrajectory integrate(const expr::VectorField&, const GridSpec&, const Perturbation&, double);
  std::uint64_t stride_ = 1;
  std::vector<std::uint64_t> steps_;
  std::vector<double> states_;
};

/// Runs y_{k+1} = y_k + dir*(F(x_k, y_k) + eps_k)*h until the budget, |y|_inf > R, or a
/// non-finite / domain fault.
EulerTrajectory integrate(const expr::VectorField& field, const GridSpec& spec, const Perturbation& pert,
                          double escape_radius);

struct BoundOptions {
  double c = 1.0;
  double d = 1.0;
  /// Lattice points per axis when sampling |F| over the rectangle.
  std::size_t lattice = 65;
  double inflation = 1.05;
  /// Forces the window length instead of min(c, d/(M+1)).
  std::optional<double> e_override;
  /// Forces the field bound instead of the sampled one.
  std::optional<double> m_override;
};

enum class BoundViolation { none, region_escape, lipschitz };

struct BoundCertificate {
  std::uint64_t anchor = 0;
  double x = 0.0;
  std::vector<double> y;
  double c = 0.0;
  double d = 0.0;
  double e = 0.0;
  double m = 0.0;
  double eps_max = 0.0;
  /// Grid indices covered by the check, inclusive.
  std::uint64_t first_index = 0;
  std::uint64_t last_index = 0;
  bool backward_checked = false;
  bool satisfied = false;
  BoundViolation violation = BoundViolation::none;
  std::optional<std::uint64_t> violating_index;
};

/// Floating-point slack added to the Lipschitz-type bound.
inline constexpr double kBoundSlack = 0x1p-40;

/// Builds (c, d, M, e) around step `anchor` and checks
/// |y_k - y_l| <= (M + eps)|x_k - x_l| on [x_p, x_p + e), and on (x_p - e, x_p] when x_p > x0.
BoundCertificate check_bound(const EulerTrajectory& traj, std::uint64_t anchor, const expr::VectorField& field,
                             const BoundOptions& options = {});

}  // namespace shadow_ode::grid
