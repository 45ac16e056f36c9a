#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace ionchan {

// Compiled arithmetic expression over named scalar variables.
//
// Grammar (whitespace insensitive):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp log sqrt abs sin cos tanh min max pow, and vtrap(x, y) =
// x / (exp(x/y) - 1) with its removable singularity filled. Constants: pi, e.
// Any other name must be one of the declared variables (e.g. "v" or "x") or a
// caller-provided constant.
class Expression {
 public:
  struct Node;

  Expression() = default;

  static Expression parse(std::string_view text, std::initializer_list<std::string_view> variables,
                          const std::map<std::string, double>& constants = {});

  /// Evaluate with variables bound positionally in declaration order.
  double operator()(double a = 0.0, double b = 0.0) const;

  const std::string& text() const noexcept { return text_; }
  bool empty() const noexcept { return !root_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace ionchan
