#include <algorithm>
#include <charconv>
#include <set>

#include "dsl/lexer.hpp"
#include "fstore/dsl.hpp"
#include "fstore/error.hpp"

namespace fstore::dsl {

std::string_view to_string(AggFunction f) {
  switch (f) {
    case AggFunction::Sum: return "sum";
    case AggFunction::Count: return "count";
    case AggFunction::Avg: return "avg";
    case AggFunction::Min: return "min";
    case AggFunction::Max: return "max";
    case AggFunction::Latest: return "latest";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
  }
  return "?";
}

ExprPtr Expr::literal(std::int64_t v) { return std::make_shared<const Expr>(Literal{v}); }
ExprPtr Expr::literal(double v) { return std::make_shared<const Expr>(Literal{v}); }
ExprPtr Expr::column(std::string name) { return std::make_shared<const Expr>(ColumnRef{std::move(name)}); }
ExprPtr Expr::negate(ExprPtr operand) { return std::make_shared<const Expr>(Negate{std::move(operand)}); }
ExprPtr Expr::binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Binary{op, std::move(lhs), std::move(rhs)});
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_.index() != b.node_.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node_);
        if constexpr (std::is_same_v<T, Expr::Literal>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, Expr::Negate>) {
          return expr_equal(x.operand, y.operand);
        } else {
          return x.op == y.op && expr_equal(x.lhs, y.lhs) && expr_equal(x.rhs, y.rhs);
        }
      },
      a.node_);
}

std::vector<std::string> DslProgram::output_names() const {
  std::vector<std::string> names;
  for (const auto& a : aggregations) names.push_back(a.output);
  for (const auto& e : row_exprs) names.push_back(e.output);
  return names;
}

Duration DslProgram::max_window() const {
  Duration w = 0;
  for (const auto& a : aggregations) w = std::max(w, a.window);
  return w;
}

namespace {

using detail::Token;
using detail::TokenKind;

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_number_word(std::string_view s) {
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return all_digits(s);
  return all_digits(s.substr(0, dot)) && all_digits(s.substr(dot + 1));
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(detail::tokenize(text)) {}

  DslProgram run() {
    DslProgram p;
    bool saw_group = false;
    bool saw_timestamp = false;
    std::set<std::string> outputs;

    while (peek().kind != TokenKind::End) {
      if (peek().kind == TokenKind::Newline) {
        advance();
        continue;
      }
      const Token& head = peek();
      if (head.kind == TokenKind::Word && head.text == "agg") {
        advance();
        AggSpec spec = parse_agg();
        claim_output(outputs, spec.output);
        p.aggregations.push_back(std::move(spec));
      } else if (head.kind == TokenKind::Word && head.text == "expr") {
        advance();
        RowExpr e = parse_row_expr();
        claim_output(outputs, e.output);
        p.row_exprs.push_back(std::move(e));
      } else if (head.kind == TokenKind::Word && head.text == "group" && !saw_group) {
        advance();
        expect_keyword("by");
        p.group_keys.push_back(expect_identifier());
        while (peek().kind == TokenKind::Comma) {
          advance();
          p.group_keys.push_back(expect_identifier());
        }
        saw_group = true;
      } else if (head.kind == TokenKind::Word && head.text == "timestamp" && !saw_timestamp) {
        advance();
        p.timestamp_column = expect_identifier();
        saw_timestamp = true;
      } else {
        fail(head, {"'agg'", "'expr'", "'group'", "'timestamp'"});
      }
      expect_end_of_statement();
    }
    if (p.aggregations.empty() && p.row_exprs.empty()) {
      fail(peek(), {"'agg'", "'expr'"});
    }
    return p;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  [[noreturn]] void fail(const Token& at, std::vector<std::string> expected) const {
    throw DslParseError(at.line, at.column, std::move(expected), detail::describe(at));
  }

  void expect(TokenKind kind, const char* what) {
    if (peek().kind != kind) fail(peek(), {what});
    advance();
  }

  void expect_keyword(const char* kw) {
    if (peek().kind != TokenKind::Word || peek().text != kw) fail(peek(), {std::string("'") + kw + "'"});
    advance();
  }

  void expect_end_of_statement() {
    if (peek().kind == TokenKind::Newline || peek().kind == TokenKind::End) {
      if (peek().kind == TokenKind::Newline) advance();
      return;
    }
    fail(peek(), {"end of line"});
  }

  std::string expect_identifier() {
    const Token& t = peek();
    if (t.kind != TokenKind::Word || is_number_word(t.text)) fail(t, {"identifier"});
    advance();
    return t.text;
  }

  void claim_output(std::set<std::string>& outputs, const std::string& name) {
    if (!outputs.insert(name).second) {
      const Token& prev = tokens_[pos_ - 1];
      throw DslParseError(prev.line, prev.column, {"unique output name"}, "'" + name + "'");
    }
  }

  AggSpec parse_agg() {
    AggSpec spec;
    const Token& fn = peek();
    static const std::pair<const char*, AggFunction> kFunctions[] = {
        {"sum", AggFunction::Sum}, {"count", AggFunction::Count}, {"avg", AggFunction::Avg},
        {"min", AggFunction::Min}, {"max", AggFunction::Max},     {"latest", AggFunction::Latest}};
    bool found = false;
    if (fn.kind == TokenKind::Word) {
      for (const auto& [name, f] : kFunctions) {
        if (fn.text == name) {
          spec.function = f;
          found = true;
        }
      }
    }
    if (!found) fail(fn, {"'sum'", "'count'", "'avg'", "'min'", "'max'", "'latest'"});
    advance();
    expect(TokenKind::LParen, "'('");
    spec.input = expect_identifier();
    expect(TokenKind::RParen, "')'");
    expect_keyword("over");
    spec.window = parse_duration();
    expect_keyword("as");
    spec.output = expect_identifier();
    return spec;
  }

  Duration parse_duration() {
    const Token& t = peek();
    if (t.kind != TokenKind::Word || t.text.size() < 2 || !all_digits(t.text.substr(0, t.text.size() - 1))) {
      fail(t, {"duration (e.g. 30d, 12h, 15m)"});
    }
    Duration unit = 0;
    switch (t.text.back()) {
      case 'm': unit = kMinute; break;
      case 'h': unit = kHour; break;
      case 'd': unit = kDay; break;
      default: fail(t, {"duration unit m, h or d"});
    }
    std::int64_t n = 0;
    auto digits = std::string_view(t.text).substr(0, t.text.size() - 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || n <= 0 || n > INT64_MAX / unit) fail(t, {"positive duration"});
    advance();
    return n * unit;
  }

  RowExpr parse_row_expr() {
    RowExpr e;
    e.expr = parse_sum();
    expect_keyword("as");
    e.output = expect_identifier();
    return e;
  }

  ExprPtr parse_sum() {
    ExprPtr lhs = parse_product();
    while (peek().kind == TokenKind::Plus || peek().kind == TokenKind::Minus) {
      BinaryOp op = advance().kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
      lhs = Expr::binary(op, lhs, parse_product());
    }
    return lhs;
  }

  ExprPtr parse_product() {
    ExprPtr lhs = parse_unary();
    while (peek().kind == TokenKind::Star || peek().kind == TokenKind::Slash) {
      BinaryOp op = advance().kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
      const Token& rhs_start = peek();
      ExprPtr rhs = parse_unary();
      if (op == BinaryOp::Div && is_literal_zero(rhs)) fail(rhs_start, {"non-zero divisor"});
      lhs = Expr::binary(op, lhs, rhs);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (peek().kind == TokenKind::Minus) {
      advance();
      return Expr::negate(parse_unary());
    }
    return parse_atom();
  }

  ExprPtr parse_atom() {
    const Token& t = peek();
    if (t.kind == TokenKind::LParen) {
      advance();
      ExprPtr inner = parse_sum();
      expect(TokenKind::RParen, "')'");
      return inner;
    }
    if (t.kind != TokenKind::Word) fail(t, {"number", "identifier", "'('", "'-'"});
    advance();
    if (!is_number_word(t.text)) return Expr::column(t.text);
    if (t.text.find('.') == std::string::npos) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc()) throw DslParseError(t.line, t.column, {"int64 literal"}, "'" + t.text + "'");
      return Expr::literal(v);
    }
    double v = 0;
    std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    return Expr::literal(v);
  }

  static bool is_literal_zero(const ExprPtr& e) {
    const Expr* cur = e.get();
    while (auto* neg = std::get_if<Expr::Negate>(&cur->node())) cur = neg->operand.get();
    auto* lit = std::get_if<Expr::Literal>(&cur->node());
    if (!lit) return false;
    if (auto* i = std::get_if<std::int64_t>(&lit->value)) return *i == 0;
    if (auto* d = std::get_if<double>(&lit->value)) return *d == 0.0;
    return false;
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

}  // namespace

DslProgram parse(std::string_view text) { return Parser(text).run(); }

}  // namespace fstore::dsl
