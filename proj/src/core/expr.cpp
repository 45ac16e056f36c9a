#include "ionchan/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include "ionchan/error.hpp"

namespace ionchan {

struct Expression::Node {
  enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
  double value = 0.0;
  int var = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(const double* vars) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::Var: return vars[var];
      case Kind::Neg: return -args[0]->eval(vars);
      case Kind::Add: return args[0]->eval(vars) + args[1]->eval(vars);
      case Kind::Sub: return args[0]->eval(vars) - args[1]->eval(vars);
      case Kind::Mul: return args[0]->eval(vars) * args[1]->eval(vars);
      case Kind::Div: return args[0]->eval(vars) / args[1]->eval(vars);
      case Kind::Pow: return std::pow(args[0]->eval(vars), args[1]->eval(vars));
      case Kind::Call: break;
    }
    const double a = args[0]->eval(vars);
    if (fn == "exp") return std::exp(a);
    if (fn == "log") return std::log(a);
    if (fn == "sqrt") return std::sqrt(a);
    if (fn == "abs") return std::fabs(a);
    if (fn == "sin") return std::sin(a);
    if (fn == "cos") return std::cos(a);
    if (fn == "tanh") return std::tanh(a);
    const double b = args[1]->eval(vars);
    if (fn == "min") return std::min(a, b);
    if (fn == "max") return std::max(a, b);
    if (fn == "vtrap") return std::fabs(a / b) < 1e-6 ? b * (1.0 - a / b / 2.0) : a / std::expm1(a / b);
    return std::pow(a, b);  // "pow"
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars,
         const std::map<std::string, double>& constants)
      : s_(text), vars_(vars), constants_(constants) {}

  NodePtr parse() {
    auto root = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression \"" + std::string(s_) + "\": " + what + " at column " +
                      std::to_string(pos_ + 1));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Kind::Add, {lhs, term()});
      else if (accept('-')) lhs = make(Kind::Sub, {lhs, term()});
      else return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Kind::Mul, {lhs, unary()});
      else if (accept('/')) lhs = make(Kind::Div, {lhs, unary()});
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::Neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Kind::Pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      auto inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::string rest(s_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Number;
    n->value = v;
    return n;
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string id(s_.substr(start, pos_ - start));
    if (accept('(')) return call(id);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == id) {
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::Var;
        n->var = static_cast<int>(i);
        return n;
      }
    }
    double value = 0.0;
    if (auto it = constants_.find(id); it != constants_.end()) value = it->second;
    else if (id == "pi") value = std::numbers::pi;
    else if (id == "e") value = std::numbers::e;
    else fail("unknown name '" + id + "'");
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Number;
    n->value = value;
    return n;
  }

  NodePtr call(const std::string& fn) {
    static const std::map<std::string, int> arity = {
        {"exp", 1}, {"log", 1}, {"sqrt", 1}, {"abs", 1}, {"sin", 1},
        {"cos", 1}, {"tanh", 1}, {"min", 2}, {"max", 2}, {"pow", 2}, {"vtrap", 2}};
    const auto it = arity.find(fn);
    if (it == arity.end()) fail("unknown function '" + fn + "'");
    std::vector<NodePtr> args{expr()};
    while (accept(',')) args.push_back(expr());
    if (!accept(')')) fail("expected ')' after arguments of " + fn);
    if (static_cast<int>(args.size()) != it->second)
      fail(fn + " takes " + std::to_string(it->second) + " argument(s)");
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Call;
    n->fn = fn;
    n->args = std::move(args);
    return n;
  }

  std::string_view s_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& constants_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text, std::initializer_list<std::string_view> variables,
                             const std::map<std::string, double>& constants) {
  if (variables.size() > 2) throw ConfigError("expressions support at most two variables");
  std::vector<std::string> vars(variables.begin(), variables.end());
  Expression e;
  e.root_ = Parser(text, vars, constants).parse();
  e.text_ = std::string(text);
  return e;
}

double Expression::operator()(double a, double b) const {
  if (!root_) return 0.0;
  const double vars[2] = {a, b};
  return root_->eval(vars);
}

}  // namespace ionchan
