#include <charconv>

#include "fstore/dsl.hpp"

namespace fstore::dsl {

namespace {

constexpr int kSumPrec = 1;
constexpr int kProductPrec = 2;
constexpr int kUnaryPrec = 3;

int precedence(BinaryOp op) {
  return (op == BinaryOp::Add || op == BinaryOp::Sub) ? kSumPrec : kProductPrec;
}

std::string format_double(double v) {
  char buf[512];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  std::string s(buf, ptr);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

std::string format_literal(const Scalar& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&v)) return format_double(*d);
  return "null";
}

std::string print(const Expr& e, int min_prec) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::Literal>) {
          return format_literal(n.value);
        } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, Expr::Negate>) {
          return "-" + print(*n.operand, kUnaryPrec);
        } else {
          int p = precedence(n.op);
          // right operand binds tighter so left-associative trees print without parentheses
          std::string s = print(*n.lhs, p) + " " + std::string(to_string(n.op)) + " " +
                          print(*n.rhs, p + 1);
          return p < min_prec ? "(" + s + ")" : s;
        }
      },
      e.node());
}

std::string format_duration(Duration d) {
  if (d % kDay == 0) return std::to_string(d / kDay) + "d";
  if (d % kHour == 0) return std::to_string(d / kHour) + "h";
  return std::to_string(d / kMinute) + "m";
}

}  // namespace

std::string pretty_print(const ExprPtr& expr) { return print(*expr, 0); }

std::string pretty_print(const DslProgram& program) {
  std::string out;
  if (!program.group_keys.empty()) {
    out += "group by ";
    for (size_t i = 0; i < program.group_keys.size(); ++i) {
      if (i) out += ", ";
      out += program.group_keys[i];
    }
    out += "\n";
  }
  if (!program.timestamp_column.empty()) out += "timestamp " + program.timestamp_column + "\n";
  for (const auto& a : program.aggregations) {
    out += "agg " + std::string(to_string(a.function)) + "(" + a.input + ") over " +
           format_duration(a.window) + " as " + a.output + "\n";
  }
  for (const auto& e : program.row_exprs) {
    out += "expr " + pretty_print(e.expr) + " as " + e.output + "\n";
  }
  return out;
}

}  // namespace fstore::dsl
