#include "shadow_ode/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

#include "shadow_ode/error.hpp"

namespace shadow_ode {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? " or " : ", ";
    out += items[i];
  }
  return out;
}

}  // namespace

SyntaxError::SyntaxError(std::size_t offset, std::vector<std::string> expected, std::string found)
    : ParseError("syntax error at offset " + std::to_string(offset) + ": expected " + join(expected) +
                     ", found " + found,
                 offset),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

UnknownIdentifier::UnknownIdentifier(std::size_t offset, std::string name)
    : ParseError("unknown identifier '" + name + "' at offset " + std::to_string(offset), offset),
      name_(std::move(name)) {}

ArityMismatch::ArityMismatch(std::size_t offset, std::string function, std::size_t expected,
                             std::size_t got)
    : ParseError("function '" + function + "' at offset " + std::to_string(offset) + " takes " +
                     std::to_string(expected) + " argument(s), got " + std::to_string(got),
                 offset),
      function_(std::move(function)) {}

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : ValidationError("expected " + std::to_string(expected) + " component expression(s), got " +
                      std::to_string(got)),
      expected_(expected),
      got_(got) {}

}  // namespace shadow_ode

namespace shadow_ode::expr {

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { number, ident, op, lparen, rparen, comma, semicolon, end, invalid };

struct Token {
  Tok kind = Tok::end;
  std::string_view text;
  std::size_t offset = 0;
  double number = 0.0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  Lexer(std::string_view text, std::size_t base) : text_(text), base_(base) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Token t;
    t.offset = base_ + pos_;
    if (pos_ >= text_.size()) {
      t.kind = Tok::end;
      current_ = t;
      return;
    }
    const std::size_t start = pos_;
    const char c = text_[pos_];
    if (is_digit(c) || (c == '.' && pos_ + 1 < text_.size() && is_digit(text_[pos_ + 1]))) {
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
        if (p < text_.size() && is_digit(text_[p])) {
          pos_ = p;
          while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
        }
      }
      t.kind = Tok::number;
      t.text = text_.substr(start, pos_ - start);
      const char* first = t.text.data();
      const char* last = first + t.text.size();
      auto [ptr, ec] = std::from_chars(first, last, t.number);
      if (ec != std::errc{} || ptr != last || !std::isfinite(t.number)) {
        throw SyntaxError(t.offset, {"finite number"}, "'" + std::string(t.text) + "'");
      }
    } else if (is_ident_start(c)) {
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      t.kind = Tok::ident;
      t.text = text_.substr(start, pos_ - start);
    } else {
      ++pos_;
      t.text = text_.substr(start, 1);
      switch (c) {
        case '+':
        case '-':
        case '*':
        case '/':
        case '^':
          t.kind = Tok::op;
          break;
        case '(':
          t.kind = Tok::lparen;
          break;
        case ')':
          t.kind = Tok::rparen;
          break;
        case ',':
          t.kind = Tok::comma;
          break;
        case ';':
          t.kind = Tok::semicolon;
          break;
        default:
          t.kind = Tok::invalid;
          break;
      }
    }
    current_ = t;
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
  Token current_;
};

std::string describe(const Token& t) {
  if (t.kind == Tok::end) return "end of input";
  return "'" + std::string(t.text) + "'";
}

// ---------------------------------------------------------------------------
// Parser

struct FunctionInfo {
  std::string_view name;
  Function function;
  std::size_t arity;
};

constexpr std::array<FunctionInfo, 11> kFunctions{{
    {"sin", Function::sin, 1},
    {"cos", Function::cos, 1},
    {"tan", Function::tan, 1},
    {"exp", Function::exp, 1},
    {"log", Function::log, 1},
    {"sqrt", Function::sqrt, 1},
    {"abs", Function::abs, 1},
    {"sign", Function::sign, 1},
    {"pow", Function::pow, 2},
    {"min", Function::min, 2},
    {"max", Function::max, 2},
}};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& f : kFunctions)
    if (f.name == name) return &f;
  return nullptr;
}

class Parser {
 public:
  Parser(Lexer& lexer, const VariableTable& variables) : lex_(lexer), vars_(variables) {}

  // expr := term (('+' | '-') term)*
  std::unique_ptr<Node> expression() {
    auto lhs = term();
    while (lex_.peek().kind == Tok::op && (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      Token op = lex_.take();
      lhs = binary(op, std::move(lhs), term());
    }
    return lhs;
  }

 private:
  // term := unary (('*' | '/') unary)*
  std::unique_ptr<Node> term() {
    auto lhs = unary();
    while (lex_.peek().kind == Tok::op && (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      Token op = lex_.take();
      lhs = binary(op, std::move(lhs), unary());
    }
    return lhs;
  }

  // unary := '-' unary | power
  std::unique_ptr<Node> unary() {
    if (lex_.peek().kind == Tok::op && lex_.peek().text == "-") {
      Token op = lex_.take();
      auto node = std::make_unique<Node>();
      node->kind = NodeKind::negate;
      node->offset = op.offset;
      node->children.push_back(unary());
      return node;
    }
    return power();
  }

  // power := primary ('^' unary)?   -- right-associative through unary
  std::unique_ptr<Node> power() {
    auto base = primary();
    if (lex_.peek().kind == Tok::op && lex_.peek().text == "^") {
      Token op = lex_.take();
      return binary(op, std::move(base), unary());
    }
    return base;
  }

  std::unique_ptr<Node> primary() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::number) {
      Token num = lex_.take();
      auto node = std::make_unique<Node>();
      node->kind = NodeKind::number;
      node->value = num.number;
      node->offset = num.offset;
      return node;
    }
    if (t.kind == Tok::lparen) {
      lex_.take();
      auto inner = expression();
      expect(Tok::rparen, ")");
      return inner;
    }
    if (t.kind == Tok::ident) {
      Token id = lex_.take();
      if (lex_.peek().kind == Tok::lparen) return call(id);
      for (const auto& [name, slot] : vars_) {
        if (name == id.text) {
          auto node = std::make_unique<Node>();
          node->kind = NodeKind::variable;
          node->name = name;
          node->slot = slot;
          node->offset = id.offset;
          return node;
        }
      }
      if (id.text == "pi" || id.text == "e") {
        auto node = std::make_unique<Node>();
        node->kind = NodeKind::constant;
        node->name = std::string(id.text);
        node->value = id.text == "pi" ? std::numbers::pi : std::numbers::e;
        node->offset = id.offset;
        return node;
      }
      if (find_function(id.text) != nullptr) {
        throw SyntaxError(lex_.peek().offset, {"'('"}, describe(lex_.peek()));
      }
      throw UnknownIdentifier(id.offset, std::string(id.text));
    }
    throw SyntaxError(t.offset, {"number", "identifier", "'('", "'-'"}, describe(t));
  }

  std::unique_ptr<Node> call(const Token& id) {
    const FunctionInfo* fn = find_function(id.text);
    if (fn == nullptr) throw UnknownIdentifier(id.offset, std::string(id.text));
    lex_.take();  // '('
    auto node = std::make_unique<Node>();
    node->kind = NodeKind::call;
    node->name = std::string(fn->name);
    node->function = fn->function;
    node->offset = id.offset;
    if (lex_.peek().kind != Tok::rparen) {
      node->children.push_back(expression());
      while (lex_.peek().kind == Tok::comma) {
        lex_.take();
        node->children.push_back(expression());
      }
    }
    expect(Tok::rparen, ")");
    if (node->children.size() != fn->arity) {
      throw ArityMismatch(id.offset, node->name, fn->arity, node->children.size());
    }
    return node;
  }

  std::unique_ptr<Node> binary(const Token& op, std::unique_ptr<Node> lhs, std::unique_ptr<Node> rhs) {
    auto node = std::make_unique<Node>();
    node->kind = NodeKind::binary;
    node->op = op.text[0];
    node->offset = op.offset;
    node->children.push_back(std::move(lhs));
    node->children.push_back(std::move(rhs));
    return node;
  }

  void expect(Tok kind, std::string_view text) {
    if (lex_.peek().kind != kind) {
      throw SyntaxError(lex_.peek().offset, {"'" + std::string(text) + "'", "operator"},
                        describe(lex_.peek()));
    }
    lex_.take();
  }

  Lexer& lex_;
  const VariableTable& vars_;
};

// ---------------------------------------------------------------------------
// Compiled program (postfix)

enum class Op : std::uint8_t {
  constant,
  slot,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  tan,
  exp,
  log,
  sqrt,
  abs,
  sign,
  min,
  max,
};

struct Instr {
  Op op;
  std::uint32_t slot = 0;
  double constant = 0.0;
};

Op function_op(Function fn) {
  switch (fn) {
    case Function::sin: return Op::sin;
    case Function::cos: return Op::cos;
    case Function::tan: return Op::tan;
    case Function::exp: return Op::exp;
    case Function::log: return Op::log;
    case Function::sqrt: return Op::sqrt;
    case Function::abs: return Op::abs;
    case Function::sign: return Op::sign;
    case Function::pow: return Op::pow;
    case Function::min: return Op::min;
    case Function::max: return Op::max;
  }
  return Op::abs;
}

Op binary_op(char c) {
  switch (c) {
    case '+': return Op::add;
    case '-': return Op::sub;
    case '*': return Op::mul;
    case '/': return Op::div;
    default: return Op::pow;
  }
}

void compile(const Node& node, std::vector<Instr>& program, std::size_t depth, std::size_t& max_depth) {
  max_depth = std::max(max_depth, depth + 1);
  switch (node.kind) {
    case NodeKind::number:
    case NodeKind::constant:
      program.push_back({Op::constant, 0, node.value});
      return;
    case NodeKind::variable:
      program.push_back({Op::slot, static_cast<std::uint32_t>(node.slot), 0.0});
      return;
    case NodeKind::negate:
      compile(*node.children[0], program, depth, max_depth);
      program.push_back({Op::neg});
      return;
    case NodeKind::binary:
      compile(*node.children[0], program, depth, max_depth);
      compile(*node.children[1], program, depth + 1, max_depth);
      program.push_back({binary_op(node.op)});
      return;
    case NodeKind::call:
      for (std::size_t i = 0; i < node.children.size(); ++i)
        compile(*node.children[i], program, depth + i, max_depth);
      program.push_back({function_op(node.function)});
      return;
  }
}

void collect_vars(const Node& node, std::vector<std::string>& out) {
  if (node.kind == NodeKind::variable &&
      std::find(out.begin(), out.end(), node.name) == out.end()) {
    out.push_back(node.name);
  }
  for (const auto& c : node.children) collect_vars(*c, out);
}

// ---------------------------------------------------------------------------
// Printer

int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::binary:
      switch (n.op) {
        case '+':
        case '-': return 1;
        case '*':
        case '/': return 2;
        default: return 4;
      }
    case NodeKind::negate: return 3;
    default: return 5;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void print(const Node& n, std::string& out);

void print_child(const Node& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print(child, out);
  if (parens) out += ')';
}

void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::number:
      out += format_number(n.value);
      return;
    case NodeKind::constant:
    case NodeKind::variable:
      out += n.name;
      return;
    case NodeKind::negate:
      out += '-';
      print_child(*n.children[0], precedence(*n.children[0]) < 3, out);
      return;
    case NodeKind::call:
      out += n.name;
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i > 0) out += ", ";
        print(*n.children[i], out);
      }
      out += ')';
      return;
    case NodeKind::binary: {
      const int p = precedence(n);
      const Node& lhs = *n.children[0];
      const Node& rhs = *n.children[1];
      if (n.op == '^') {
        // Base binds tighter than '^'; exponent is parsed as a unary operand.
        print_child(lhs, precedence(lhs) <= p, out);
        out += '^';
        print_child(rhs, precedence(rhs) < 3, out);
        return;
      }
      print_child(lhs, precedence(lhs) < p, out);
      out += p == 1 ? (n.op == '+' ? " + " : " - ") : (n.op == '*' ? "*" : "/");
      print_child(rhs, precedence(rhs) <= p, out);
      return;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression

struct Expression::Impl {
  std::unique_ptr<Node> root;
  std::vector<Instr> program;
  std::size_t stack_depth = 1;
  std::size_t slot_count = 0;
  std::vector<std::string> free_vars;
};

Expression::Expression() {
  auto impl = std::make_shared<Impl>();
  impl->root = std::make_unique<Node>();
  impl->program.push_back({Op::constant, 0, 0.0});
  impl_ = std::move(impl);
}

Expression Expression::from_tree(std::unique_ptr<Node> root, std::size_t slot_count) {
  auto impl = std::make_shared<Impl>();
  impl->slot_count = slot_count;
  compile(*root, impl->program, 0, impl->stack_depth);
  collect_vars(*root, impl->free_vars);
  impl->root = std::move(root);
  Expression e;
  e.impl_ = std::move(impl);
  return e;
}

const Node& Expression::root() const noexcept { return *impl_->root; }

const std::vector<std::string>& Expression::free_vars() const noexcept { return impl_->free_vars; }

std::size_t Expression::slot_count() const noexcept { return impl_->slot_count; }

std::string Expression::to_string() const {
  std::string out;
  print(*impl_->root, out);
  return out;
}

namespace {

constexpr std::string_view kDivByZero = "division by zero";
constexpr std::string_view kLogDomain = "log of non-positive argument";
constexpr std::string_view kSqrtDomain = "sqrt of negative argument";
constexpr std::string_view kPowDomain = "pow with negative base and non-integer exponent";
constexpr std::string_view kPowZero = "zero raised to a negative power";
constexpr std::string_view kUndefined = "undefined (NaN) result";

inline EvalResult check(double v) noexcept {
  if (std::isfinite(v)) return {};
  if (std::isnan(v)) return {EvalStatus::domain_error, kUndefined};
  return {EvalStatus::overflow, {}};
}

}  // namespace

EvalResult Expression::evaluate(std::span<const double> slots, double& out) const noexcept {
  const Impl& impl = *impl_;
  std::array<double, 64> small{};
  std::vector<double> large;
  double* stack = small.data();
  if (impl.stack_depth > small.size()) {
    large.resize(impl.stack_depth);
    stack = large.data();
  }
  std::size_t sp = 0;
  for (const Instr& ins : impl.program) {
    double r = 0.0;
    switch (ins.op) {
      case Op::constant:
        stack[sp++] = ins.constant;
        continue;
      case Op::slot: {
        const double v = slots[ins.slot];
        if (EvalResult c = check(v); c.status != EvalStatus::ok) return c;
        stack[sp++] = v;
        continue;
      }
      case Op::neg:
        stack[sp - 1] = -stack[sp - 1];
        continue;
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div:
      case Op::pow:
      case Op::min:
      case Op::max: {
        const double b = stack[--sp];
        const double a = stack[sp - 1];
        switch (ins.op) {
          case Op::add: r = a + b; break;
          case Op::sub: r = a - b; break;
          case Op::mul: r = a * b; break;
          case Op::div:
            if (b == 0.0) return {EvalStatus::domain_error, kDivByZero};
            r = a / b;
            break;
          case Op::pow:
            if (a < 0.0 && std::trunc(b) != b) return {EvalStatus::domain_error, kPowDomain};
            if (a == 0.0 && b < 0.0) return {EvalStatus::domain_error, kPowZero};
            r = std::pow(a, b);
            break;
          case Op::min: r = std::min(a, b); break;
          default: r = std::max(a, b); break;
        }
        break;
      }
      default: {
        const double a = stack[sp - 1];
        switch (ins.op) {
          case Op::sin: r = std::sin(a); break;
          case Op::cos: r = std::cos(a); break;
          case Op::tan: r = std::tan(a); break;
          case Op::exp: r = std::exp(a); break;
          case Op::log:
            if (a <= 0.0) return {EvalStatus::domain_error, kLogDomain};
            r = std::log(a);
            break;
          case Op::sqrt:
            if (a < 0.0) return {EvalStatus::domain_error, kSqrtDomain};
            r = std::sqrt(a);
            break;
          case Op::abs: r = std::abs(a); break;
          default: r = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); break;
        }
        break;
      }
    }
    if (EvalResult c = check(r); c.status != EvalStatus::ok) return c;
    stack[sp - 1] = r;
  }
  out = stack[0];
  return {};
}

bool structurally_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
  switch (a.kind) {
    case NodeKind::number:
      if (a.value != b.value) return false;
      break;
    case NodeKind::constant:
    case NodeKind::variable:
    case NodeKind::call:
      if (a.name != b.name) return false;
      break;
    case NodeKind::binary:
      if (a.op != b.op) return false;
      break;
    case NodeKind::negate:
      break;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!structurally_equal(*a.children[i], *b.children[i])) return false;
  return true;
}

namespace {

std::size_t slot_count_of(const VariableTable& variables) {
  std::size_t n = 0;
  for (const auto& [name, slot] : variables) n = std::max(n, slot + 1);
  return n;
}

}  // namespace

Expression parse_expression(std::string_view text, const VariableTable& variables, std::size_t offset_base) {
  Lexer lexer(text, offset_base);
  Parser parser(lexer, variables);
  auto root = parser.expression();
  if (lexer.peek().kind != Tok::end) {
    throw SyntaxError(lexer.peek().offset, {"operator", "end of input"}, describe(lexer.peek()));
  }
  return Expression::from_tree(std::move(root), slot_count_of(variables));
}

std::vector<Expression> parse_expression_list(std::string_view text, const VariableTable& variables,
                                              std::size_t count) {
  Lexer lexer(text, 0);
  Parser parser(lexer, variables);
  std::vector<std::unique_ptr<Node>> roots;
  while (true) {
    roots.push_back(parser.expression());
    if (lexer.peek().kind == Tok::semicolon) {
      lexer.take();
      continue;
    }
    if (lexer.peek().kind != Tok::end) {
      throw SyntaxError(lexer.peek().offset, {"operator", "';'", "end of input"}, describe(lexer.peek()));
    }
    break;
  }
  if (roots.size() != count) throw DimensionMismatch(count, roots.size());
  std::vector<Expression> out;
  out.reserve(roots.size());
  const std::size_t slots = slot_count_of(variables);
  for (auto& r : roots) out.push_back(Expression::from_tree(std::move(r), slots));
  return out;
}

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(std::vector<Expression> components, std::string source)
    : components_(std::move(components)), source_(std::move(source)) {}

std::vector<std::string> VectorField::declared_vars() const {
  std::vector<std::string> vars{"x"};
  for (std::size_t i = 0; i < dim(); ++i) vars.push_back("y" + std::to_string(i));
  return vars;
}

EvalResult VectorField::evaluate(double x, std::span<const double> y, std::span<double> out) const noexcept {
  std::array<double, 32> small{};
  std::vector<double> large;
  std::span<double> slots;
  if (y.size() + 1 <= small.size()) {
    slots = std::span<double>(small.data(), y.size() + 1);
  } else {
    large.resize(y.size() + 1);
    slots = large;
  }
  slots[0] = x;
  std::copy(y.begin(), y.end(), slots.begin() + 1);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    EvalResult r = components_[i].evaluate(slots, out[i]);
    if (r.status != EvalStatus::ok) return r;
  }
  return {};
}

std::string VectorField::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i > 0) out += "; ";
    out += components_[i].to_string();
  }
  return out;
}

VariableTable field_variables(std::size_t dim) {
  VariableTable vars{{"x", 0}};
  for (std::size_t i = 0; i < dim; ++i) vars.emplace_back("y" + std::to_string(i), i + 1);
  if (dim == 1) {
    vars.emplace_back("y", 1);
    vars.emplace_back("t", 0);
  }
  return vars;
}

VariableTable scalar_variables() { return {{"x", 0}, {"t", 0}}; }

VectorField parse(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ValidationError("field dimension must be positive");
  return VectorField(parse_expression_list(text, field_variables(dim), dim), std::string(text));
}

Evaluation eval(const VectorField& field, double x, std::span<const double> y) {
  if (y.size() != field.dim()) throw DimensionMismatch(field.dim(), y.size());
  Evaluation result;
  result.values.assign(field.dim(), 0.0);
  EvalResult r = field.evaluate(x, y, result.values);
  if (r.status == EvalStatus::domain_error) throw DomainError(std::string(r.detail));
  result.status = r.status;
  return result;
}

double eval_scalar(const Expression& f, double x) {
  if (f.slot_count() > 1) throw ValidationError("expression is not a function of a single variable");
  std::array<double, 1> slots{x};
  double out = 0.0;
  EvalResult r = f.evaluate(slots, out);
  if (r.status == EvalStatus::domain_error) throw DomainError(std::string(r.detail));
  if (r.status == EvalStatus::overflow) return std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace shadow_ode::expr
