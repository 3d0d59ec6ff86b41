#include "wavemap/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "wavemap/error.hpp"

namespace wavemap {

struct Expression::Node {
  enum class Op { constant, variable, add, sub, mul, div, neg, pow, sin, cos };
  Op op = Op::constant;
  double value = 0.0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;

  double eval(double x) const {
    switch (op) {
      case Op::constant: return value;
      case Op::variable: return x;
      case Op::add: return lhs->eval(x) + rhs->eval(x);
      case Op::sub: return lhs->eval(x) - rhs->eval(x);
      case Op::mul: return lhs->eval(x) * rhs->eval(x);
      case Op::div: return lhs->eval(x) / rhs->eval(x);
      case Op::neg: return -lhs->eval(x);
      case Op::pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Op::sin: return std::sin(lhs->eval(x));
      case Op::cos: return std::cos(lhs->eval(x));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  n->value = value;
  return n;
}

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto node = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return node;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("expression '" + std::string(text_) + "': " + msg + " at column " +
                     std::to_string(pos_ + 1));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    auto node = term();
    for (;;) {
      if (accept('+'))
        node = make(Op::add, node, term());
      else if (accept('-'))
        node = make(Op::sub, node, term());
      else
        return node;
    }
  }

  NodePtr term() {
    auto node = unary();
    for (;;) {
      if (accept('*'))
        node = make(Op::mul, node, unary());
      else if (accept('/'))
        node = make(Op::div, node, unary());
      else
        return node;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (accept('^')) return make(Op::pow, base, unary());
    return base;
  }

  std::string identifier() {
    std::string id;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])))
      id.push_back(text_[pos_++]);
    return id;
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.data() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Op::constant, nullptr, nullptr, v);
    }
    if (accept('(')) {
      auto node = expr();
      expect(')');
      return node;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      auto id = identifier();
      if (id == "x" || id == "rho") return make(Op::variable);
      if (id == "pi") return make(Op::constant, nullptr, nullptr, std::numbers::pi);
      if (id == "e") return make(Op::constant, nullptr, nullptr, std::numbers::e);
      if (id == "sin" || id == "cos") {
        expect('(');
        auto arg = expr();
        expect(')');
        return make(id == "sin" ? Op::sin : Op::cos, arg);
      }
      if (id == "pow") {
        expect('(');
        auto a = expr();
        expect(',');
        auto b = expr();
        expect(')');
        return make(Op::pow, a, b);
      }
      fail("unknown identifier '" + id + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

Expression Expression::parse(std::string_view text) {
  Parser p(text);
  return Expression(p.parse(), std::string(text));
}

double Expression::operator()(double x) const { return root_->eval(x); }

}  // namespace wavemap
