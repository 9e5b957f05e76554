#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace shadow_ode::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInternal = 1,
  kValidation = 2,
  kNumerical = 3,
  kDomain = 4,
};

inline const std::vector<std::string> kCommands = {"solve", "osgood", "funnel", "recover", "integrate", "check"};

struct RunConfig {
  std::string command;

  std::string field = "0";
  /// 0 infers the dimension from the number of ';'-separated components.
  std::size_t dim = 0;
  double x0 = 0.0;
  std::vector<double> y0 = {0.0};
  double t_max = 2.0;
  std::uint64_t n0 = 1024;
  int refinements = 8;
  double tol = 1e-4;
  double spacing = 0x1p-7;
  double escape_radius = 1e6;
  std::string pert = "zero";
  bool two_sided = false;
  int refine = 0;
  std::size_t pairs = 50;

  // funnel
  std::vector<std::string> rules;
  // osgood
  double eps0 = 1e-2;
  int jeps = 12;
  bool minimal = false;
  // recover / check
  std::string known;
  std::string known_prime;
  double c = 1.0;
  int level = 0;
  double anchor = 0.0;
  // integrate
  std::string f;
  double a = 0.0;
  double b = 1.0;

  std::string out;
  std::string svg;

  std::size_t resolved_dim() const;
  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Splits "1,2.5,-3" into numbers. Throws ValidationError.
std::vector<double> parse_number_list(const std::string& text);

/// Executes a validated config; writes the JSON summary to `out`, diagnostics to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command line entry point: flag parsing, --config / --dump-config, error mapping.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shadow_ode::cli
