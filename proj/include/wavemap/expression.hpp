#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace wavemap {

/// A compiled scalar expression in one variable.
///
/// Grammar (usual precedence, `^` right-associative):
///
///     expr   := term (('+' | '-') term)*
///     term   := unary (('*' | '/') unary)*
///     unary  := ('+' | '-') unary | power
///     power  := atom ('^' unary)?
///     atom   := number | 'x' | 'rho' | 'pi' | 'e'
///             | ('sin' | 'cos') '(' expr ')'
///             | 'pow' '(' expr ',' expr ')'
///             | '(' expr ')'
///
/// Both `x` and `rho` name the variable.
class Expression {
public:
  static Expression parse(std::string_view text);

  double operator()(double x) const;
  const std::string& source() const noexcept { return source_; }

  struct Node;

private:
  Expression(std::shared_ptr<const Node> root, std::string source);

  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace wavemap
