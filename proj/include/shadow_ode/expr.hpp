#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shadow_ode::expr {

enum class NodeKind { number, constant, variable, negate, binary, call };

enum class Function { sin, cos, tan, exp, log, sqrt, abs, sign, pow, min, max };

struct Node {
  NodeKind kind = NodeKind::number;
  double value = 0.0;      // number, constant
  std::string name;        // constant, variable, call
  std::size_t slot = 0;    // variable
  char op = 0;             // binary: + - * / ^
  Function function = Function::sin;
  std::vector<std::unique_ptr<Node>> children;
  std::size_t offset = 0;  // byte offset of the node in the source
};

enum class EvalStatus { ok, overflow, domain_error };

struct EvalResult {
  EvalStatus status = EvalStatus::ok;
  /// Static description of a domain fault ("log of non-positive argument").
  std::string_view detail;
};

/// Name -> slot mapping used while parsing. Several names may share a slot.
using VariableTable = std::vector<std::pair<std::string, std::size_t>>;

/// Immutable parsed expression. Copies share the tree and compiled program.
class Expression {
 public:
  Expression();

  const Node& root() const noexcept;
  /// Variable names referenced by the expression, in order of first use.
  const std::vector<std::string>& free_vars() const noexcept;
  std::size_t slot_count() const noexcept;

  /// Evaluates with slots[i] bound to the variable(s) of slot i.
  EvalResult evaluate(std::span<const double> slots, double& out) const noexcept;

  std::string to_string() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  friend Expression parse_expression(std::string_view, const VariableTable&, std::size_t);
  friend std::vector<Expression> parse_expression_list(std::string_view, const VariableTable&, std::size_t);
  friend class VectorField;
  static Expression from_tree(std::unique_ptr<Node> root, std::size_t slot_count);
};

/// Parses one expression over the given variables. offset_base is added to every
/// reported error offset.
Expression parse_expression(std::string_view text, const VariableTable& variables,
                            std::size_t offset_base = 0);

/// Parses a ';'-separated list of exactly `count` expressions.
std::vector<Expression> parse_expression_list(std::string_view text, const VariableTable& variables,
                                              std::size_t count);

bool structurally_equal(const Node& a, const Node& b);

/// Right-hand side F(x, y0, ..., y{n-1}) of an ODE system.
class VectorField {
 public:
  VectorField() = default;
  VectorField(std::vector<Expression> components, std::string source);

  std::size_t dim() const noexcept { return components_.size(); }
  const std::vector<Expression>& components() const noexcept { return components_; }
  /// "x" followed by "y0".."y{n-1}".
  std::vector<std::string> declared_vars() const;
  const std::string& source() const noexcept { return source_; }

  /// Hot-path evaluation; out.size() must equal dim().
  EvalResult evaluate(double x, std::span<const double> y, std::span<double> out) const noexcept;

  std::string to_string() const;

 private:
  std::vector<Expression> components_;
  std::string source_;
};

/// Variables of a dim-dimensional field: x -> 0, y{i} -> i + 1, plus t and y aliases when dim == 1.
VariableTable field_variables(std::size_t dim);

/// Variables of a function of one real argument: x (alias t).
VariableTable scalar_variables();

VectorField parse(std::string_view text, std::size_t dim);

struct Evaluation {
  EvalStatus status = EvalStatus::ok;
  std::vector<double> values;
};

/// Convenience evaluation. Throws DomainError; overflow is reported through status.
Evaluation eval(const VectorField& field, double x, std::span<const double> y);

/// Evaluates a one-variable expression at x. Throws DomainError; returns +-inf on overflow.
double eval_scalar(const Expression& f, double x);

}  // namespace shadow_ode::expr
