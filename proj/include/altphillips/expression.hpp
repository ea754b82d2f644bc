#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "altphillips/error.hpp"
#include "altphillips/fields.hpp"

namespace altphillips {

// Arithmetic over x1, x2, x3: numbers, pi, + - * / ^ (right associative,
// binds tighter than unary minus), parentheses, sin, cos, exp, max(a, b, ...).
class Expression {
public:
  Expression() = default;

  explicit Expression(const std::string& text) : text_(text) {
    Parser p{text, 0};
    root_ = p.parse_sum();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
  }

  double operator()(const Vec3& x) const { return eval(*root_, x); }
  double operator()() const { return eval(*root_, Vec3{0.0, 0.0, 0.0}); }

  // Highest coordinate index used (0 when constant).
  int max_coordinate() const { return max_coord(*root_); }

  const std::string& text() const { return text_; }

private:
  enum class Op { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Max };

  struct Node {
    Op op = Op::Num;
    double value = 0.0;
    int var = 0;
    std::vector<std::unique_ptr<Node>> kids;
  };
  using Ptr = std::unique_ptr<Node>;

  static Ptr make(Op op, std::vector<Ptr> kids = {}) {
    auto n = std::make_unique<Node>();
    n->op = op;
    n->kids = std::move(kids);
    return n;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw DomainError("expression \"" + s + "\" at offset " + std::to_string(pos) + ": " + what);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    Ptr parse_sum() {
      Ptr lhs = parse_product();
      for (;;) {
        if (eat('+')) {
          std::vector<Ptr> k;
          k.push_back(std::move(lhs));
          k.push_back(parse_product());
          lhs = make(Op::Add, std::move(k));
        } else if (eat('-')) {
          std::vector<Ptr> k;
          k.push_back(std::move(lhs));
          k.push_back(parse_product());
          lhs = make(Op::Sub, std::move(k));
        } else {
          return lhs;
        }
      }
    }

    Ptr parse_product() {
      Ptr lhs = parse_unary();
      for (;;) {
        const bool mul = eat('*');
        if (!mul && !eat('/')) return lhs;
        std::vector<Ptr> k;
        k.push_back(std::move(lhs));
        k.push_back(parse_unary());
        lhs = make(mul ? Op::Mul : Op::Div, std::move(k));
      }
    }

    Ptr parse_unary() {
      if (eat('-')) {
        std::vector<Ptr> k;
        k.push_back(parse_unary());
        return make(Op::Neg, std::move(k));
      }
      if (eat('+')) return parse_unary();
      return parse_power();
    }

    Ptr parse_power() {
      Ptr base = parse_primary();
      if (!eat('^')) return base;
      std::vector<Ptr> k;
      k.push_back(std::move(base));
      k.push_back(parse_unary());
      return make(Op::Pow, std::move(k));
    }

    Ptr parse_primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        Ptr e = parse_sum();
        if (!eat(')')) fail("missing ')'");
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos += static_cast<std::size_t>(end - begin);
        auto n = make(Op::Num);
        n->value = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string id = s.substr(start, pos - start);
        if (id == "x1" || id == "x2" || id == "x3") {
          auto n = make(Op::Var);
          n->var = id[1] - '1';
          return n;
        }
        if (id == "pi") {
          auto n = make(Op::Num);
          n->value = std::numbers::pi;
          return n;
        }
        Op op;
        if (id == "sin")
          op = Op::Sin;
        else if (id == "cos")
          op = Op::Cos;
        else if (id == "exp")
          op = Op::Exp;
        else if (id == "max")
          op = Op::Max;
        else {
          pos = start;
          fail("unknown name '" + id + "'");
        }
        if (!eat('(')) fail("'(' expected after " + id);
        std::vector<Ptr> args;
        args.push_back(parse_sum());
        while (eat(',')) args.push_back(parse_sum());
        if (!eat(')')) fail("missing ')'");
        if (op != Op::Max && args.size() != 1) fail(id + " takes one argument");
        if (op == Op::Max && args.size() < 2) fail("max takes at least two arguments");
        return make(op, std::move(args));
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  static double eval(const Node& n, const Vec3& x) {
    switch (n.op) {
      case Op::Num: return n.value;
      case Op::Var: return x[n.var];
      case Op::Add: return eval(*n.kids[0], x) + eval(*n.kids[1], x);
      case Op::Sub: return eval(*n.kids[0], x) - eval(*n.kids[1], x);
      case Op::Mul: return eval(*n.kids[0], x) * eval(*n.kids[1], x);
      case Op::Div: return eval(*n.kids[0], x) / eval(*n.kids[1], x);
      case Op::Pow: return std::pow(eval(*n.kids[0], x), eval(*n.kids[1], x));
      case Op::Neg: return -eval(*n.kids[0], x);
      case Op::Sin: return std::sin(eval(*n.kids[0], x));
      case Op::Cos: return std::cos(eval(*n.kids[0], x));
      case Op::Exp: return std::exp(eval(*n.kids[0], x));
      case Op::Max: {
        double m = eval(*n.kids[0], x);
        for (std::size_t k = 1; k < n.kids.size(); ++k) m = std::max(m, eval(*n.kids[k], x));
        return m;
      }
    }
    return 0.0;
  }

  static int max_coord(const Node& n) {
    int m = n.op == Op::Var ? n.var + 1 : 0;
    for (const auto& k : n.kids) m = std::max(m, max_coord(*k));
    return m;
  }

  std::string text_;
  std::shared_ptr<Node> root_;
};

}  // namespace altphillips
