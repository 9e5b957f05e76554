#include "shadow_ode/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "shadow_ode/error.hpp"
#include "shadow_ode/format.hpp"

namespace shadow_ode::grid {

namespace {

constexpr std::uint64_t kFullStorageLimit = std::uint64_t{1} << 21;

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of its arguments.
double unit_noise(std::uint64_t seed, int level, std::uint64_t k, std::size_t component) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(level));
  s = splitmix64(s ^ k);
  s = splitmix64(s ^ component);
  return std::ldexp(static_cast<double>(s >> 11), -52) - 1.0;
}

}  // namespace

bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::uint64_t GridSpec::n() const { return n0 << level; }

double GridSpec::h() const { return std::ldexp(1.0 / static_cast<double>(n0), -level); }

std::uint64_t GridSpec::k_max() const {
  const std::uint64_t nn = n();
  const std::uint64_t square = nn > (std::uint64_t{1} << 31) ? std::numeric_limits<std::uint64_t>::max() : nn * nn;
  if (k_max_override) return std::min(*k_max_override, square);
  const double steps = std::ceil(t_max * static_cast<double>(nn));
  return std::min(static_cast<std::uint64_t>(steps), square);
}

std::uint64_t GridSpec::effective_stride() const {
  if (stride != 0) return stride;
  const std::uint64_t k = k_max();
  std::uint64_t s = 1;
  while (k / s > kFullStorageLimit) s <<= 1;
  return s;
}

void GridSpec::validate() const {
  if (!is_power_of_two(n0)) throw ValidationError("N0 must be a power of two");
  if (level < 0 || level > 40 || (n0 << level) >> level != n0) throw ValidationError("refinement level out of range");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ValidationError("horizon T_max must be positive and finite");
  if (!std::isfinite(x0)) throw ValidationError("x0 must be finite");
  if (y0.empty()) throw ValidationError("initial state must be non-empty");
  for (double v : y0)
    if (!std::isfinite(v)) throw ValidationError("initial state must be finite");
  if (direction != 1 && direction != -1) throw ValidationError("direction must be +1 or -1");
}

// ---------------------------------------------------------------------------

Perturbation Perturbation::zero() { return Perturbation{}; }

Perturbation Perturbation::constant(double c) {
  if (!std::isfinite(c)) throw ValidationError("perturbation constant must be finite");
  Perturbation p;
  p.kind_ = Kind::constant;
  p.constant_ = c;
  p.eps_max_ = std::abs(c);
  return p;
}

Perturbation Perturbation::sampled(std::vector<double> values, std::size_t dim) {
  if (dim == 0 || values.size() % dim != 0) throw ValidationError("sampled perturbation size is not a multiple of dim");
  Perturbation p;
  p.kind_ = Kind::sampled;
  p.dim_ = dim;
  p.eps_max_ = sup_norm(values);
  p.values_ = std::move(values);
  return p;
}

Perturbation Perturbation::recorded(std::vector<double> values, std::vector<double> abscissas) {
  if (values.size() != abscissas.size()) throw ValidationError("recorded perturbation needs one abscissa per step");
  Perturbation p;
  p.kind_ = Kind::recorded;
  p.dim_ = 1;
  p.eps_max_ = sup_norm(values);
  p.values_ = std::move(values);
  p.abscissas_ = std::move(abscissas);
  return p;
}

std::string Perturbation::describe() const {
  switch (kind_) {
    case Kind::zero: return "zero";
    case Kind::constant: return "const:" + format_double(constant_);
    case Kind::sampled: return "sampled(steps=" + std::to_string(steps()) + ",eps_max=" + format_double(eps_max_) + ")";
    case Kind::recorded: return "recorded(steps=" + std::to_string(steps()) + ",eps_max=" + format_double(eps_max_) + ")";
  }
  return "zero";
}

PerturbationRule PerturbationRule::parse(const std::string& descriptor) {
  auto number = [&](const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text.empty() || !std::isfinite(v)) {
      throw ValidationError("bad number '" + text + "' in perturbation '" + descriptor + "'");
    }
    return v;
  };
  if (descriptor == "zero") return {ZeroRule{}};
  if (descriptor.rfind("const:", 0) == 0) return {ConstantRule{number(descriptor.substr(6))}};
  if (descriptor.rfind("rand:", 0) == 0) {
    const std::string rest = descriptor.substr(5);
    const auto colon = rest.find(':');
    RandomRule r;
    r.amplitude = number(rest.substr(0, colon));
    if (colon != std::string::npos) {
      const std::string seed = rest.substr(colon + 1);
      if (seed.empty() || seed.find_first_not_of("0123456789") != std::string::npos) {
        throw ValidationError("bad seed in perturbation '" + descriptor + "'");
      }
      r.seed = std::stoull(seed);
    }
    if (r.amplitude < 0.0) throw ValidationError("random perturbation amplitude must be non-negative");
    return {r};
  }
  throw ValidationError("unknown perturbation '" + descriptor + "' (expected zero, const:<v> or rand:<amp>:<seed>)");
}

std::string PerturbationRule::describe() const {
  if (std::holds_alternative<ConstantRule>(rule)) return "const:" + format_double(std::get<ConstantRule>(rule).value);
  if (std::holds_alternative<RandomRule>(rule)) {
    const auto& r = std::get<RandomRule>(rule);
    return "rand:" + format_double(r.amplitude) + ":" + std::to_string(r.seed);
  }
  return "zero";
}

Perturbation PerturbationRule::realize(int level, std::uint64_t k_max, std::size_t dim) const {
  if (std::holds_alternative<ConstantRule>(rule)) return Perturbation::constant(std::get<ConstantRule>(rule).value);
  if (std::holds_alternative<RandomRule>(rule)) {
    const auto& r = std::get<RandomRule>(rule);
    const double amplitude = std::ldexp(r.amplitude, -level);
    std::vector<double> values(k_max * dim);
    for (std::uint64_t k = 0; k < k_max; ++k)
      for (std::size_t i = 0; i < dim; ++i) values[k * dim + i] = amplitude * unit_noise(r.seed, level, k, i);
    return Perturbation::sampled(std::move(values), dim);
  }
  return Perturbation::zero();
}

// ---------------------------------------------------------------------------

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::escaped: return "escaped";
    case StopReason::non_finite: return "non_finite";
    case StopReason::domain_error: return "domain_error";
  }
  return "unknown";
}

std::optional<std::size_t> EulerTrajectory::row_of(std::uint64_t k) const noexcept {
  if (k > k_stop || steps_.empty()) return std::nullopt;
  const std::size_t row = static_cast<std::size_t>(k / stride_);
  if (row < steps_.size() && steps_[row] == k) return row;
  if (steps_.back() == k) return steps_.size() - 1;
  return std::nullopt;
}

std::span<const double> EulerTrajectory::y(std::uint64_t k) const {
  auto row = row_of(k);
  if (!row) throw ValidationError("step " + std::to_string(k) + " is not stored in the trajectory");
  return stored_state(*row);
}

bool EulerTrajectory::value_at(double q, std::span<double> out) const {
  const double s = (q - spec.x0) * static_cast<double>(spec.direction) / spec.h();
  if (!(s >= 0.0) || s > static_cast<double>(k_stop)) return false;
  const std::uint64_t last = steps_.back();
  if (s >= static_cast<double>(last)) {
    std::copy_n(states_.data() + (steps_.size() - 1) * dim, dim, out.begin());
    return true;
  }
  std::size_t row = static_cast<std::size_t>(std::floor(s / static_cast<double>(stride_)));
  row = std::min(row, steps_.size() - 2);
  const double ka = static_cast<double>(steps_[row]);
  const double kb = static_cast<double>(steps_[row + 1]);
  const double w = (s - ka) / (kb - ka);
  const double* a = states_.data() + row * dim;
  const double* b = a + dim;
  for (std::size_t i = 0; i < dim; ++i) out[i] = w == 0.0 ? a[i] : a[i] + w * (b[i] - a[i]);
  return true;
}

void EulerTrajectory::write_csv(std::ostream& os) const {
  os << "k,x";
  for (std::size_t i = 0; i < dim; ++i) os << ",y" << i;
  os << '\n';
  for (std::size_t r = 0; r < steps_.size(); ++r) {
    os << steps_[r] << ',' << format_double(spec.x(steps_[r]));
    for (double v : stored_state(r)) os << ',' << format_double(v);
    os << '\n';
  }
}

EulerTrajectory integrate(const expr::VectorField& field, const GridSpec& spec, const Perturbation& pert,
                          double escape_radius) {
  spec.validate();
  const std::size_t dim = field.dim();
  if (spec.y0.size() != dim) throw DimensionMismatch(dim, spec.y0.size());
  if (!(escape_radius > sup_norm(spec.y0))) throw ValidationError("escape radius must exceed |y0|");

  EulerTrajectory traj;
  traj.spec = spec;
  traj.perturbation = pert;
  traj.dim = dim;
  traj.escape_radius = escape_radius;
  traj.stride_ = spec.effective_stride();

  const std::uint64_t k_max = spec.k_max();
  const double hs = static_cast<double>(spec.direction) * spec.h();
  traj.steps_.reserve(static_cast<std::size_t>(k_max / traj.stride_ + 2));
  traj.states_.reserve(traj.steps_.capacity() * dim);

  std::vector<double> y = spec.y0;
  std::vector<double> f(dim);
  auto store = [&](std::uint64_t k) {
    traj.steps_.push_back(k);
    traj.states_.insert(traj.states_.end(), y.begin(), y.end());
  };
  auto store_last = [&](std::uint64_t k) {
    if (traj.steps_.back() != k) store(k);
  };
  store(0);

  for (std::uint64_t k = 0; k < k_max; ++k) {
    const expr::EvalResult r = field.evaluate(spec.x(k), y, f);
    if (r.status != expr::EvalStatus::ok) {
      store_last(k);
      traj.k_stop = k;
      if (r.status == expr::EvalStatus::domain_error) {
        traj.stop_reason = StopReason::domain_error;
        traj.fault = std::string(r.detail) + " at step " + std::to_string(k);
      } else {
        traj.stop_reason = StopReason::non_finite;
      }
      return traj;
    }
    bool finite = true;
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double next = y[i] + (f[i] + pert.at(k, i)) * hs;
      finite = finite && std::isfinite(next);
      f[i] = next;
      norm = std::max(norm, std::abs(next));
    }
    if (!finite) {
      store_last(k);
      traj.k_stop = k;
      traj.stop_reason = StopReason::non_finite;
      return traj;
    }
    y.swap(f);
    const std::uint64_t next_k = k + 1;
    if (norm > escape_radius) {
      store(next_k);
      traj.k_stop = next_k;
      traj.stop_reason = StopReason::escaped;
      return traj;
    }
    if (next_k % traj.stride_ == 0 || next_k == k_max) store(next_k);
  }
  traj.k_stop = k_max;
  traj.stop_reason = StopReason::budget_exhausted;
  return traj;
}

// ---------------------------------------------------------------------------

namespace {

// Samples max |F|_inf on [xa, xb] x prod [y_i - d, y_i + d].
double sample_field_bound(const expr::VectorField& field, double xa, double xb, std::span<const double> center,
                          double d, std::size_t lattice) {
  const std::size_t dim = field.dim();
  std::size_t per_axis = std::max<std::size_t>(lattice, 2);
  auto total = [&](std::size_t p) {
    double t = 1.0;
    for (std::size_t i = 0; i <= dim; ++i) t *= static_cast<double>(p);
    return t;
  };
  while (per_axis > 3 && total(per_axis) > static_cast<double>(1 << 20)) per_axis = (per_axis + 1) / 2;

  std::vector<std::size_t> idx(dim + 1, 0);
  std::vector<double> y(dim), out(dim);
  double m = 0.0;
  auto coord = [&](std::size_t i, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(per_axis - 1);
  };
  while (true) {
    const double x = coord(idx[0], xa, xb);
    for (std::size_t i = 0; i < dim; ++i) y[i] = coord(idx[i + 1], center[i] - d, center[i] + d);
    const expr::EvalResult r = field.evaluate(x, y, out);
    if (r.status == expr::EvalStatus::domain_error) {
      throw DomainError("field bound sampling: " + std::string(r.detail));
    }
    if (r.status == expr::EvalStatus::overflow) return std::numeric_limits<double>::infinity();
    m = std::max(m, sup_norm(out));
    std::size_t a = 0;
    while (a <= dim && ++idx[a] == per_axis) idx[a++] = 0;
    if (a > dim) break;
  }
  return m;
}

}  // namespace

BoundCertificate check_bound(const EulerTrajectory& traj, std::uint64_t anchor, const expr::VectorField& field,
                             const BoundOptions& options) {
  if (anchor >= traj.k_stop && !(anchor == traj.k_stop && traj.stop_reason == StopReason::budget_exhausted)) {
    throw ValidationError("anchor index must precede the trajectory stop");
  }
  if (!(options.c > 0.0) || !(options.d > 0.0)) throw ValidationError("bound rectangle sides must be positive");
  const auto anchor_row = traj.row_of(anchor);
  if (!anchor_row) throw ValidationError("anchor step is not stored in the trajectory");

  const double h = traj.spec.h();
  const double dir = static_cast<double>(traj.spec.direction);
  BoundCertificate cert;
  cert.anchor = anchor;
  cert.x = traj.x(anchor);
  const auto center = traj.stored_state(*anchor_row);
  cert.y.assign(center.begin(), center.end());
  cert.d = options.d;
  cert.eps_max = traj.perturbation.eps_max();
  cert.backward_checked = anchor > 0;

  // Forward reach c; when the anchor is interior the two-sided rectangle also needs c <= distance to x0.
  const double back_room = static_cast<double>(anchor) * h;
  cert.c = cert.backward_checked ? std::min(options.c, back_room) : options.c;

  const double x_lo = cert.backward_checked ? cert.x - dir * cert.c : cert.x;
  const double x_hi = cert.x + dir * cert.c;
  const double sampled =
      sample_field_bound(field, std::min(x_lo, x_hi), std::max(x_lo, x_hi), center, cert.d, options.lattice);
  cert.m = options.m_override ? *options.m_override : options.inflation * sampled;
  cert.e = options.e_override ? *options.e_override : std::min(cert.c, cert.d / (cert.m + 1.0));

  if (!std::isfinite(cert.m) || !(cert.e > 0.0)) {
    cert.satisfied = false;
    cert.violation = BoundViolation::lipschitz;
    return cert;
  }

  // Indices with |x_k - x_p| < e.
  const double reach = std::ceil(cert.e / h) - 1.0;
  const std::uint64_t span_steps = reach > 0.0 ? static_cast<std::uint64_t>(reach) : 0;
  cert.first_index = cert.backward_checked ? anchor - std::min(anchor, span_steps) : anchor;
  cert.last_index = std::min(traj.k_stop, anchor + span_steps);

  const double lipschitz = cert.m + cert.eps_max;
  const std::size_t dim = traj.dim;
  std::vector<double> run_min(dim, std::numeric_limits<double>::infinity());
  std::vector<double> run_max(dim, -std::numeric_limits<double>::infinity());

  for (std::size_t row = 0; row < traj.stored(); ++row) {
    const std::uint64_t k = traj.stored_step(row);
    if (k < cert.first_index) continue;
    if (k > cert.last_index) break;
    const auto y = traj.stored_state(row);
    const double t = static_cast<double>(k - cert.first_index) * h;
    for (std::size_t i = 0; i < dim; ++i) {
      if (std::abs(y[i] - center[i]) > cert.d) {
        cert.violation = BoundViolation::region_escape;
        cert.violating_index = k;
        return cert;
      }
      const double lo = y[i] - lipschitz * t;
      const double hi = y[i] + lipschitz * t;
      if (lo > run_min[i] + kBoundSlack || hi < run_max[i] - kBoundSlack) {
        cert.violation = BoundViolation::lipschitz;
        cert.violating_index = k;
        return cert;
      }
      run_min[i] = std::min(run_min[i], lo);
      run_max[i] = std::max(run_max[i], hi);
    }
  }
  cert.satisfied = true;
  return cert;
}

}  // namespace shadow_ode::grid
