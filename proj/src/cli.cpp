#include "shadow_ode/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "shadow_ode/error.hpp"
#include "shadow_ode/expr.hpp"
#include "shadow_ode/format.hpp"
#include "shadow_ode/grid.hpp"
#include "shadow_ode/osgood.hpp"
#include "shadow_ode/peano.hpp"
#include "shadow_ode/perturb.hpp"
#include "shadow_ode/plot.hpp"
#include "shadow_ode/quad.hpp"
#include "shadow_ode/shadow.hpp"

namespace shadow_ode::cli {

using nlohmann::json;

namespace {

bool power_of_two_double(double v) {
  int e = 0;
  return v > 0.0 && std::isfinite(v) && std::frexp(v, &e) == 0.5;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  return os;
}

peano::SolveOptions solve_options(const RunConfig& c) {
  peano::SolveOptions o;
  o.n0 = c.n0;
  o.refinements = c.refinements;
  o.t_max = c.t_max;
  o.tol = c.tol;
  o.spacing = c.spacing;
  o.escape_radius = c.escape_radius;
  o.rule = grid::PerturbationRule::parse(c.pert);
  o.two_sided = c.two_sided;
  o.refine_passes = c.refine;
  return o;
}

json solution_summary(const shadow::Solution& s) { return json::parse(s.header_json()); }

void add_solution_series(plot::Figure& fig, const shadow::Solution& s, const std::string& label, std::size_t color,
                         bool color_per_component) {
  const std::size_t dim = s.samples.empty() ? 0 : s.samples.front().y.size();
  for (std::size_t i = 0; i < dim; ++i) {
    plot::Series series;
    series.label = dim > 1 ? label + " y" + std::to_string(i) : label;
    series.color = color_per_component ? color + i : color;
    for (const auto& p : s.samples) {
      series.x.push_back(p.x);
      series.y.push_back(p.y[i]);
    }
    fig.series.push_back(std::move(series));
  }
}

void write_svg_file(const std::string& path, const plot::Figure& fig) {
  auto os = open_output(path);
  plot::write_svg(os, fig);
}

json run_solve(const RunConfig& c) {
  const auto field = expr::parse(c.field, c.resolved_dim());
  const auto sol = peano::solve_global(field, c.x0, c.y0, solve_options(c));
  json s = solution_summary(sol);
  if (c.pairs > 0 && sol.samples.size() >= 2) s["max_residual"] = peano::residual_check(sol, field, c.pairs);
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    sol.write_csv(os);
  }
  if (!c.svg.empty()) {
    plot::Figure fig;
    fig.title = "y' = " + c.field;
    add_solution_series(fig, sol, sol.provenance, 0, true);
    write_svg_file(c.svg, fig);
  }
  return s;
}

json run_osgood(const RunConfig& c) {
  if (c.y0.size() != 1) throw DimensionMismatch(1, c.y0.size());
  const auto field = expr::parse(c.field, c.resolved_dim());
  osgood::OsgoodOptions oo;
  oo.eps0 = c.eps0;
  oo.j_eps = c.jeps;
  auto opts = solve_options(c);
  const auto ext = c.minimal ? osgood::minimal(field, c.x0, c.y0[0], oo, opts)
                             : osgood::maximal(field, c.x0, c.y0[0], oo, opts);
  json s = solution_summary(ext.base);
  s["kind"] = c.minimal ? "minimal" : "maximal";
  s["domination_margin"] = ext.domination_margin;
  s["cauchy_gaps"] = ext.cauchy_gaps;
  s["not_globally_resolved"] = ext.not_globally_resolved;
  json segs = json::array();
  for (const auto& g : ext.segments) segs.push_back({{"start_x", g.start_x}, {"start_value", g.start_value}, {"end_x", g.end_x}});
  s["segments"] = segs;
  if (c.pairs > 0 && ext.base.samples.size() >= 2) s["max_residual"] = peano::residual_check(ext.base, field, c.pairs);
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    ext.base.write_csv(os);
  }
  if (!c.svg.empty()) {
    plot::Figure fig;
    fig.title = std::string(c.minimal ? "minimal" : "maximal") + " solution of y' = " + c.field;
    add_solution_series(fig, ext.base, ext.base.provenance, 0, true);
    write_svg_file(c.svg, fig);
  }
  return s;
}

json run_funnel(const RunConfig& c) {
  const auto field = expr::parse(c.field, c.resolved_dim());
  std::vector<grid::PerturbationRule> rules;
  for (const auto& r : c.rules.empty() ? std::vector<std::string>{c.pert} : c.rules)
    rules.push_back(grid::PerturbationRule::parse(r));
  const auto fn = perturb::funnel(field, c.x0, c.y0, rules, solve_options(c));
  json members = json::array();
  for (const auto& m : fn.members) {
    members.push_back({{"rule", m.rule.describe()},
                       {"cluster", m.cluster},
                       {"a_est", m.solution.a_est},
                       {"blow_up", m.solution.blow_up},
                       {"samples", m.solution.samples.size()}});
  }
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    const std::size_t dim = field.dim();
    os << "rule,cluster,q";
    for (std::size_t i = 0; i < dim; ++i) os << ",y" << i;
    os << ",err_est\n";
    for (const auto& m : fn.members) {
      const std::string rule = m.rule.describe();
      for (const auto& p : m.solution.samples) {
        os << rule << ',' << m.cluster << ',' << format_double(p.x);
        for (double v : p.y) os << ',' << format_double(v);
        os << ',' << format_double(p.err_est) << '\n';
      }
    }
  }
  if (!c.svg.empty()) {
    plot::Figure fig;
    fig.title = "solution funnel of y' = " + c.field;
    for (const auto& m : fn.members) {
      add_solution_series(fig, m.solution, m.rule.describe() + " [" + std::to_string(m.cluster) + "]", m.cluster,
                          false);
    }
    write_svg_file(c.svg, fig);
  }
  return {{"clusters", fn.cluster_count}, {"members", members}};
}

json run_recover(const RunConfig& c) {
  if (c.known.empty() || c.known_prime.empty()) throw ValidationError("recover needs --known and --known-prime");
  const auto field = expr::parse(c.field, c.resolved_dim());
  const auto known = perturb::KnownSolution::parse(c.known, c.known_prime, c.x0, c.c);
  known.check_against(field);
  grid::GridSpec spec;
  spec.x0 = c.x0;
  spec.y0 = c.y0;
  spec.n0 = c.n0;
  spec.level = c.level;
  spec.t_max = c.t_max;
  const auto pert = perturb::recover(field, known, spec);
  const double dev = perturb::verify_roundtrip(field, known, pert, spec);
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    os << "k,x,t,eps\n";
    const auto eps = pert.values();
    const auto ts = pert.abscissas();
    for (std::size_t k = 0; k < eps.size(); ++k) {
      os << k << ',' << format_double(spec.x(k)) << ',' << format_double(ts[k]) << ',' << format_double(eps[k])
         << '\n';
    }
  }
  if (!c.svg.empty()) {
    plot::Figure fig;
    fig.title = "recovered perturbation for y = " + c.known;
    fig.y_label = "eps_k";
    plot::Series s;
    s.label = "eps_k, N=" + std::to_string(spec.n());
    for (std::size_t k = 0; k < pert.values().size(); ++k) {
      s.x.push_back(spec.x(k));
      s.y.push_back(pert.values()[k]);
    }
    fig.series.push_back(std::move(s));
    write_svg_file(c.svg, fig);
  }
  return {{"n", spec.n()}, {"h", spec.h()}, {"steps", pert.steps()}, {"eps_max", pert.eps_max()}, {"max_dev", dev}};
}

json run_integrate(const RunConfig& c) {
  if (c.f.empty()) throw ValidationError("integrate needs --f");
  const auto f = expr::parse_expression(c.f, expr::scalar_variables());
  const auto r = quad::integrate_certified(f, c.a, c.b, c.tol);
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    os << "n,delta\n";
    for (std::size_t i = 0; i < r.certificate.levels.size(); ++i) {
      os << r.certificate.levels[i] << ','
         << (i == 0 ? std::string("nan") : format_double(r.certificate.deltas[i - 1])) << '\n';
    }
  }
  return {{"value", r.value},
          {"order", r.certificate.order()},
          {"levels", r.certificate.levels},
          {"deltas", r.certificate.deltas}};
}

json run_check(const RunConfig& c, bool& satisfied) {
  const auto field = expr::parse(c.field, c.resolved_dim());
  grid::GridSpec spec;
  spec.x0 = c.x0;
  spec.y0 = c.y0;
  spec.n0 = c.n0;
  spec.level = c.level;
  spec.t_max = c.t_max;
  spec.validate();
  const auto rule = grid::PerturbationRule::parse(c.pert);
  const auto pert = rule.realize(spec.level, spec.k_max(), field.dim());
  const auto traj = grid::integrate(field, spec, pert, std::ldexp(c.escape_radius, 2 * c.level));
  const double steps = (c.anchor - c.x0) / spec.h();
  if (!(steps >= 0.0) || steps != std::floor(steps)) throw ValidationError("--anchor must be a grid point x0 + k*h");
  const auto cert = grid::check_bound(traj, static_cast<std::uint64_t>(steps), field);
  satisfied = cert.satisfied;
  if (!c.out.empty()) {
    auto os = open_output(c.out);
    traj.write_csv(os);
  }
  json s = {{"anchor", cert.anchor},  {"x", cert.x},
            {"y", cert.y},            {"c", cert.c},
            {"d", cert.d},            {"e", cert.e},
            {"m", cert.m},            {"eps_max", cert.eps_max},
            {"first_index", cert.first_index}, {"last_index", cert.last_index},
            {"backward_checked", cert.backward_checked}, {"satisfied", cert.satisfied},
            {"stop_reason", grid::to_string(traj.stop_reason)}, {"k_stop", traj.k_stop}};
  static const char* kViolation[] = {"none", "region_escape", "lipschitz"};
  s["violation"] = kViolation[static_cast<int>(cert.violation)];
  if (cert.violating_index) s["violating_index"] = *cert.violating_index;
  return s;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::size_t RunConfig::resolved_dim() const {
  if (dim != 0) return dim;
  return static_cast<std::size_t>(std::count(field.begin(), field.end(), ';')) + 1;
}

void RunConfig::validate() const {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    throw ValidationError("unknown or missing command '" + command + "'");
  }
  auto finite = [](double v, const char* name) {
    if (!std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite");
  };
  finite(x0, "x0");
  finite(a, "a");
  finite(b, "b");
  finite(c, "c");
  finite(anchor, "anchor");
  for (double v : y0) finite(v, "y0");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ValidationError("tmax must be positive and finite");
  if (n0 == 0 || (n0 & (n0 - 1)) != 0) throw ValidationError("n0 must be a power of two");
  if (refinements < 3) throw ValidationError("refinements must be at least 3");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw ValidationError("tol must be positive and finite");
  if (!power_of_two_double(spacing)) throw ValidationError("spacing must be a power of two");
  if (!(escape_radius > 0.0)) throw ValidationError("escape radius must be positive");
  if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw ValidationError("eps0 must be positive and finite");
  if (jeps < 3) throw ValidationError("jeps must be at least 3");
  if (level < 0 || level > 30) throw ValidationError("level must lie in [0, 30]");
  if (refine < 0) throw ValidationError("refine must be non-negative");
  if (command != "integrate" && y0.size() != resolved_dim()) throw DimensionMismatch(resolved_dim(), y0.size());
  if (command == "integrate" && !(a <= b)) throw ValidationError("integrate needs a <= b");
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"command", c.command},
           {"field", c.field},
           {"dim", c.dim},
           {"x0", c.x0},
           {"y0", c.y0},
           {"tmax", c.t_max},
           {"n0", c.n0},
           {"refinements", c.refinements},
           {"tol", c.tol},
           {"spacing", c.spacing},
           {"escape", c.escape_radius},
           {"pert", c.pert},
           {"two_sided", c.two_sided},
           {"refine", c.refine},
           {"pairs", c.pairs},
           {"rules", c.rules},
           {"eps0", c.eps0},
           {"jeps", c.jeps},
           {"minimal", c.minimal},
           {"known", c.known},
           {"known_prime", c.known_prime},
           {"c", c.c},
           {"level", c.level},
           {"anchor", c.anchor},
           {"f", c.f},
           {"a", c.a},
           {"b", c.b},
           {"out", c.out},
           {"svg", c.svg}};
}

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known_keys = {
      "command", "field", "dim",    "x0",    "y0",    "tmax",        "n0", "refinements", "tol",   "spacing",
      "escape",  "pert",  "two_sided", "refine", "pairs", "rules",    "eps0", "jeps",      "minimal", "known",
      "known_prime", "c", "level", "anchor", "f", "a", "b", "out", "svg"};
  for (const auto& item : j.items()) {
    if (!known_keys.count(item.key())) throw ValidationError("unknown config key '" + item.key() + "'");
  }
  const RunConfig d;
  c.command = get_or(j, "command", d.command);
  c.field = get_or(j, "field", d.field);
  c.dim = get_or(j, "dim", d.dim);
  c.x0 = get_or(j, "x0", d.x0);
  c.y0 = get_or(j, "y0", d.y0);
  c.t_max = get_or(j, "tmax", d.t_max);
  c.n0 = get_or(j, "n0", d.n0);
  c.refinements = get_or(j, "refinements", d.refinements);
  c.tol = get_or(j, "tol", d.tol);
  c.spacing = get_or(j, "spacing", d.spacing);
  c.escape_radius = get_or(j, "escape", d.escape_radius);
  c.pert = get_or(j, "pert", d.pert);
  c.two_sided = get_or(j, "two_sided", d.two_sided);
  c.refine = get_or(j, "refine", d.refine);
  c.pairs = get_or(j, "pairs", d.pairs);
  c.rules = get_or(j, "rules", d.rules);
  c.eps0 = get_or(j, "eps0", d.eps0);
  c.jeps = get_or(j, "jeps", d.jeps);
  c.minimal = get_or(j, "minimal", d.minimal);
  c.known = get_or(j, "known", d.known);
  c.known_prime = get_or(j, "known_prime", d.known_prime);
  c.c = get_or(j, "c", d.c);
  c.level = get_or(j, "level", d.level);
  c.anchor = get_or(j, "anchor", d.anchor);
  c.f = get_or(j, "f", d.f);
  c.a = get_or(j, "a", d.a);
  c.b = get_or(j, "b", d.b);
  c.out = get_or(j, "out", d.out);
  c.svg = get_or(j, "svg", d.svg);
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(',', start);
    std::string item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    double v = 0.0;
    const char* first = item.data();
    if (!item.empty() && item[0] == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ValidationError("not a number list: '" + text + "'");
    }
    out.push_back(v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    json summary;
    bool satisfied = true;
    if (config.command == "solve") summary = run_solve(config);
    else if (config.command == "osgood") summary = run_osgood(config);
    else if (config.command == "funnel") summary = run_funnel(config);
    else if (config.command == "recover") summary = run_recover(config);
    else if (config.command == "integrate") summary = run_integrate(config);
    else summary = run_check(config, satisfied);
    summary["command"] = config.command;
    out << summary.dump(2) << '\n';
    if (!satisfied) {
      err << "error: bound certificate not satisfied\n";
      return kNumerical;
    }
    return kSuccess;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what();
    if (e.index() >= 0) err << " (index " << e.index() << ')';
    err << '\n';
    return kDomain;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global ODE solutions from perturbed Euler ladders"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto bind = [&](const std::string& name, auto member, const std::string& help) {
    using T = std::remove_reference_t<decltype(std::declval<RunConfig&>().*member)>;
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *holder, help);
    overrides.emplace_back(opt, [holder, member](RunConfig& c) { c.*member = *holder; });
    return opt;
  };
  auto flag = [&](const std::string& name, bool RunConfig::*member, const std::string& help) {
    auto holder = std::make_shared<bool>(false);
    CLI::Option* opt = app.add_flag(name, *holder, help);
    overrides.emplace_back(opt, [holder, member](RunConfig& c) { c.*member = *holder; });
  };

  bind("command", &RunConfig::command, "solve | osgood | funnel | recover | integrate | check")
      ->check(CLI::IsMember(kCommands));
  bind("--field", &RunConfig::field, "right-hand side, components separated by ';'");
  bind("--dim", &RunConfig::dim, "system dimension (default: number of components)");
  bind("--x0", &RunConfig::x0, "initial abscissa");
  auto y0_text = std::make_shared<std::string>();
  auto* y0_opt = app.add_option("--y0", *y0_text, "initial value, comma-separated");
  bind("--tmax", &RunConfig::t_max, "horizon length");
  bind("--n0", &RunConfig::n0, "coarsest grid size (power of two)");
  bind("--refinements", &RunConfig::refinements, "number of ladder refinements J");
  bind("--tol", &RunConfig::tol, "Cauchy tolerance (quadrature tolerance for integrate)");
  bind("--spacing", &RunConfig::spacing, "query spacing (power of two)");
  bind("--escape", &RunConfig::escape_radius, "escape radius R0 of the coarsest level");
  bind("--pert", &RunConfig::pert, "perturbation rule: zero | const:<v> | rand:<amplitude>:<seed>");
  flag("--two-sided", &RunConfig::two_sided, "also integrate backward from x0");
  bind("--refine", &RunConfig::refine, "bisection passes on the domain boundary");
  bind("--pairs", &RunConfig::pairs, "random pairs for the integral residual check (0 skips it)");
  auto rules_text = std::make_shared<std::string>();
  auto* rules_opt = app.add_option("--rules", *rules_text, "funnel rules, comma-separated");
  bind("--eps0", &RunConfig::eps0, "largest superequation epsilon");
  bind("--jeps", &RunConfig::jeps, "epsilon ladder length");
  flag("--minimal", &RunConfig::minimal, "compute the minimal instead of the maximal solution");
  bind("--known", &RunConfig::known, "known solution y(x) for recover");
  bind("--known-prime", &RunConfig::known_prime, "its derivative y'(x)");
  bind("--c", &RunConfig::c, "right end of the known solution's domain");
  bind("--level", &RunConfig::level, "grid level for recover / check (N = n0 * 2^level)");
  bind("--anchor", &RunConfig::anchor, "anchor abscissa for check");
  bind("--f", &RunConfig::f, "integrand for integrate");
  bind("--a", &RunConfig::a, "lower integration limit");
  bind("--b", &RunConfig::b, "upper integration limit");
  bind("--out", &RunConfig::out, "CSV output path");
  bind("--svg", &RunConfig::svg, "SVG plot output path");
  std::string config_path;
  std::string dump_path;
  app.add_option("--config", config_path, "JSON config; flags override its values");
  app.add_option("--dump-config", dump_path, "write the effective config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidation;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ValidationError("cannot read config " + config_path);
      config = json::parse(is).get<RunConfig>();
    }
    for (auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(config);
    if (y0_opt->count() > 0) config.y0 = parse_number_list(*y0_text);
    if (rules_opt->count() > 0) {
      config.rules.clear();
      std::stringstream ss(*rules_text);
      for (std::string r; std::getline(ss, r, ',');)
        if (!r.empty()) config.rules.push_back(r);
    }
    if (!dump_path.empty()) {
      auto os = open_output(dump_path);
      os << json(config).dump(2) << '\n';
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const json::exception& e) {
    err << "error: bad config: " << e.what() << '\n';
    return kValidation;
  }
  return run(config, out, err);
}

}  // namespace shadow_ode::cli
