#include "shadow_ode/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "shadow_ode/error.hpp"
#include "shadow_ode/format.hpp"

namespace shadow_ode::shadow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    if (std::isnan(x)) return kNaN;
    m = std::max(m, std::abs(x));
  }
  return m;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!std::isfinite(d)) return kInf;
    m = std::max(m, d);
  }
  return m;
}

bool stopped_early(const grid::EulerTrajectory& t) {
  return t.stop_reason == grid::StopReason::escaped || t.stop_reason == grid::StopReason::non_finite;
}

// |v_J| >= |v_{J-1}| >= |v_{J-2}|, with escaped levels counting as +inf.
bool growing(const QueryRow& row, std::size_t levels, std::size_t dim) {
  const double a = sup_norm(row.level_value(levels - 3, dim));
  const double b = sup_norm(row.level_value(levels - 2, dim));
  const double c = sup_norm(row.level_value(levels - 1, dim));
  return c >= b && b >= a;
}

Sample to_sample(const QueryRow& row, std::size_t levels, std::size_t dim) {
  const auto v = row.level_value(levels - 1, dim);
  return Sample{row.q, std::vector<double>(v.begin(), v.end()), row.err_est};
}

}  // namespace

const char* to_string(QueryStatus status) {
  switch (status) {
    case QueryStatus::converged: return "converged";
    case QueryStatus::bounded: return "bounded";
    case QueryStatus::diverged: return "diverged";
    case QueryStatus::undefined: return "undefined";
  }
  return "undefined";
}

void RefinementLadder::validate() const {
  if (levels.empty()) throw InsufficientLadder("ladder has no levels");
  if (escape_radii.size() != levels.size()) throw ValidationError("one escape radius per ladder level required");
  for (std::size_t j = 1; j < levels.size(); ++j) {
    const auto& a = levels[j - 1].spec;
    const auto& b = levels[j].spec;
    if (b.n() != 2 * a.n()) throw ValidationError("ladder levels must double N");
    if (!(escape_radii[j] > escape_radii[j - 1])) throw ValidationError("escape radii must increase");
    if (a.x0 != b.x0 || a.direction != b.direction) throw ValidationError("ladder levels must share origin");
  }
}

QueryRow classify(const RefinementLadder& ladder, double q, double tol) {
  const std::size_t levels = ladder.levels.size();
  const std::size_t dim = ladder.dim();
  QueryRow row;
  row.q = q;
  row.values.assign(levels * dim, kNaN);
  std::vector<double> norms(levels, kNaN);
  for (std::size_t j = 0; j < levels; ++j) {
    const auto& traj = ladder.levels[j];
    std::span<double> out(row.values.data() + j * dim, dim);
    if (traj.value_at(q, out)) {
      norms[j] = sup_norm(out);
    } else if (stopped_early(traj)) {
      std::fill(out.begin(), out.end(), kInf);
      norms[j] = kInf;
    }
    if (row.diverged_level < 0 && norms[j] > ladder.escape_radii[j]) row.diverged_level = static_cast<int>(j);
  }

  const std::size_t top = levels - 1;
  const bool finite3 = std::isfinite(norms[top]) && std::isfinite(norms[top - 1]) && std::isfinite(norms[top - 2]);
  row.err_est = finite3 ? sup_diff(row.level_value(top, dim), row.level_value(top - 1, dim)) : kInf;
  const bool top_escaped = norms[top] > ladder.escape_radii[top] || norms[top - 1] > ladder.escape_radii[top - 1] ||
                           norms[top - 2] > ladder.escape_radii[top - 2];

  if (finite3 && row.err_est <= tol) {
    row.status = QueryStatus::converged;
  } else if (row.diverged_level >= 0 && norms[top] >= norms[top - 1]) {
    row.status = QueryStatus::diverged;
  } else if (finite3 && !top_escaped &&
             row.err_est <= kContractionLimit * sup_diff(row.level_value(top - 1, dim), row.level_value(top - 2, dim))) {
    row.status = QueryStatus::bounded;
  } else {
    row.status = QueryStatus::undefined;
  }
  return row;
}

ShadowTable extract(const RefinementLadder& ladder, double spacing, double tol) {
  if (ladder.levels.size() < 4) throw InsufficientLadder("shadow extraction needs J >= 3 (at least 4 levels)");
  ladder.validate();
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  const double h0 = ladder.levels.front().spec.h();
  if (!(spacing >= h0)) throw ValidationError("query spacing must be at least the coarsest step h_0");

  ShadowTable table;
  table.x0 = ladder.x0();
  table.direction = ladder.direction();
  table.spacing = spacing;
  table.tol = tol;
  table.t_max = ladder.t_max();
  table.dim = ladder.dim();
  table.levels = ladder.levels.size();
  table.n0 = ladder.levels.front().spec.n();
  table.escape_radii = ladder.escape_radii;

  const auto count = static_cast<std::uint64_t>(std::floor(table.t_max / spacing * (1.0 + 1e-12)));
  table.rows.reserve(count + 1);
  for (std::uint64_t i = 0; i <= count; ++i) {
    const double q = table.x0 + static_cast<double>(table.direction) * static_cast<double>(i) * spacing;
    table.rows.push_back(classify(ladder, q, tol));
  }
  return table;
}

double estimate_order(const ShadowTable& table) {
  if (table.levels < 3) throw TooFewSamples("order estimate needs at least 3 ladder levels");
  const std::size_t top = table.levels - 1;
  std::size_t converged = 0;
  std::vector<double> orders;
  for (const auto& row : table.rows) {
    if (row.status != QueryStatus::converged) continue;
    ++converged;
    const double fine = sup_diff(row.level_value(top, table.dim), row.level_value(top - 1, table.dim));
    const double coarse = sup_diff(row.level_value(top - 1, table.dim), row.level_value(top - 2, table.dim));
    if (fine > 0.0 && coarse > 0.0 && std::isfinite(fine) && std::isfinite(coarse)) {
      orders.push_back(std::log2(coarse / fine));
    }
  }
  if (converged < 5) throw TooFewSamples("order estimate needs at least 5 converged queries");
  if (orders.empty()) return kInf;
  std::sort(orders.begin(), orders.end());
  const std::size_t m = orders.size() / 2;
  return orders.size() % 2 == 1 ? orders[m] : 0.5 * (orders[m - 1] + orders[m]);
}

Solution close(const ShadowTable& table) {
  if (table.rows.empty() || table.rows.front().status != QueryStatus::converged) {
    throw OriginDiverged("the query at the initial point did not converge");
  }
  const std::size_t levels = table.levels;
  const std::size_t dim = table.dim;
  const double dir = static_cast<double>(table.direction);

  std::size_t prefix = 0;
  while (prefix < table.rows.size() && table.rows[prefix].status == QueryStatus::converged) ++prefix;
  std::size_t limited = prefix;
  while (limited < table.rows.size() && table.rows[limited].limited()) ++limited;

  Solution sol;
  sol.x0 = table.x0;
  sol.spacing = table.spacing;
  for (std::size_t i = 0; i < prefix; ++i) sol.samples.push_back(to_sample(table.rows[i], levels, dim));
  for (std::size_t i = prefix; i < limited; ++i) sol.frontier.push_back(to_sample(table.rows[i], levels, dim));

  double endpoint = 0.0;
  bool blow_up = false;
  bool horizon = false;
  double bracket_lo = kNaN;
  double bracket_hi = kNaN;
  if (limited == table.rows.size()) {
    horizon = true;
    endpoint = table.x0 + dir * table.t_max;
  } else {
    bracket_lo = table.rows[limited - 1].q;
    bracket_hi = table.rows[limited].q;
    endpoint = 0.5 * (bracket_lo + bracket_hi);
    for (std::size_t i = limited; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      if (row.status == QueryStatus::diverged) {
        blow_up = true;
        break;
      }
      if (!growing(row, levels, dim)) break;
    }
  }

  double max_err = 0.0;
  for (const auto& s : sol.samples) max_err = std::max(max_err, s.err_est);
  sol.certificate.max_err_est = max_err;
  sol.certificate.levels = levels;
  sol.certificate.tol = table.tol;
  sol.certificate.n0 = table.n0;
  try {
    sol.certificate.order = estimate_order(table);
  } catch (const TooFewSamples&) {
    sol.certificate.order = kNaN;
  }

  if (table.direction > 0) {
    sol.a_est = endpoint;
    sol.blow_up = blow_up;
    sol.reached_horizon = horizon;
    sol.a_lower = table.x0;
    sol.upper_bracket_lo = bracket_lo;
    sol.upper_bracket_hi = bracket_hi;
    sol.lower_bracket_lo = sol.lower_bracket_hi = kNaN;
  } else {
    std::reverse(sol.samples.begin(), sol.samples.end());
    std::reverse(sol.frontier.begin(), sol.frontier.end());
    sol.a_lower = endpoint;
    sol.blow_up_lower = blow_up;
    sol.reached_horizon_lower = horizon;
    sol.a_est = table.x0;
    sol.lower_bracket_lo = bracket_lo;
    sol.lower_bracket_hi = bracket_hi;
    sol.upper_bracket_lo = sol.upper_bracket_hi = kNaN;
  }
  return sol;
}

void refine_boundary(const RefinementLadder& ladder, Solution& solution, int passes) {
  const int dir = ladder.direction();
  double& lo = dir > 0 ? solution.upper_bracket_lo : solution.lower_bracket_lo;
  double& hi = dir > 0 ? solution.upper_bracket_hi : solution.lower_bracket_hi;
  if (std::isnan(lo) || std::isnan(hi)) return;
  const double h0 = ladder.levels.front().spec.h();
  const double tol = solution.certificate.tol;
  for (int p = 0; p < passes && std::abs(hi - lo) > h0; ++p) {
    const double mid = 0.5 * (lo + hi);
    if (classify(ladder, mid, tol).limited()) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  (dir > 0 ? solution.a_est : solution.a_lower) = 0.5 * (lo + hi);
}

bool Solution::covers(double x) const {
  return !samples.empty() && x >= samples.front().x && x <= samples.back().x;
}

void Solution::value_at(double x, std::span<double> out) const {
  if (!covers(x)) throw ValidationError("abscissa " + format_double(x) + " lies outside the certified samples");
  const double s = (x - samples.front().x) / spacing;
  std::size_t i = static_cast<std::size_t>(std::floor(s));
  if (i + 1 >= samples.size()) {
    std::copy(samples.back().y.begin(), samples.back().y.end(), out.begin());
    return;
  }
  const double w = s - static_cast<double>(i);
  const auto& a = samples[i].y;
  const auto& b = samples[i + 1].y;
  for (std::size_t c = 0; c < a.size(); ++c) out[c] = w == 0.0 ? a[c] : a[c] + w * (b[c] - a[c]);
}

std::vector<double> Solution::value_at(double x) const {
  std::vector<double> out(samples.empty() ? 0 : samples.front().y.size());
  value_at(x, out);
  return out;
}

const Sample* Solution::sample_at(double x) const {
  if (!covers(x)) return nullptr;
  const double s = std::round((x - samples.front().x) / spacing);
  const auto i = static_cast<std::size_t>(s);
  if (i < samples.size() && samples[i].x == x) return &samples[i];
  return nullptr;
}

std::string Solution::header_json() const {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
  };
  nlohmann::json j;
  j["a_est"] = number(a_est);
  j["blow_up"] = blow_up;
  j["reached_horizon"] = reached_horizon;
  j["a_lower"] = number(a_lower);
  j["blow_up_lower"] = blow_up_lower;
  j["order"] = number(certificate.order);
  j["max_err_est"] = number(certificate.max_err_est);
  j["tol"] = certificate.tol;
  j["levels"] = certificate.levels;
  j["n0"] = certificate.n0;
  j["spacing"] = spacing;
  j["samples"] = samples.size();
  j["provenance"] = provenance;
  return j.dump();
}

void Solution::write_csv(std::ostream& os) const {
  os << "# " << header_json() << '\n';
  os << "q";
  const std::size_t dim = samples.empty() ? field.dim() : samples.front().y.size();
  for (std::size_t i = 0; i < dim; ++i) os << ",y" << i;
  os << ",err_est\n";
  for (const auto& s : samples) {
    os << format_double(s.x);
    for (double v : s.y) os << ',' << format_double(v);
    os << ',' << format_double(s.err_est) << '\n';
  }
}

double sup_distance(const Solution& a, const Solution& b) {
  double worst = 0.0;
  bool any = false;
  for (const auto& s : a.samples) {
    const Sample* t = b.sample_at(s.x);
    if (t == nullptr) continue;
    any = true;
    worst = std::max(worst, sup_diff(s.y, t->y));
  }
  return any ? worst : kInf;
}

}  // namespace shadow_ode::shadow
