#pragma once

// Transformation DSL. Line-oriented, one statement per line, `#` starts a comment:
//
//   group by account_id            # optional; defaults to the entity index columns
//   timestamp ts                   # optional; defaults to the source timestamp column
//   agg sum(amount) over 30d as amount_30d_sum
//   expr amount_30d_sum / 30 as amount_30d_daily
//
// Windows take units m, h or d. Aggregations emit one row per (group, t) at multiples of the
// emit interval; each covers source rows with timestamp in [t - window, t).

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fstore/frame.hpp"
#include "fstore/types.hpp"

namespace fstore::dsl {

enum class AggFunction { Sum, Count, Avg, Min, Max, Latest };
enum class BinaryOp { Add, Sub, Mul, Div };

std::string_view to_string(AggFunction f);
std::string_view to_string(BinaryOp op);

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable arithmetic tree. Equality is structural.
class Expr {
 public:
  struct Literal {
    Scalar value;  // int64 or float64
  };
  struct ColumnRef {
    std::string name;
  };
  struct Negate {
    ExprPtr operand;
  };
  struct Binary {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
  };
  using Node = std::variant<Literal, ColumnRef, Negate, Binary>;

  explicit Expr(Node node) : node_(std::move(node)) {}

  const Node& node() const { return node_; }

  static ExprPtr literal(std::int64_t v);
  static ExprPtr literal(double v);
  static ExprPtr column(std::string name);
  static ExprPtr negate(ExprPtr operand);
  static ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  Node node_;
};

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

struct AggSpec {
  std::string output;
  AggFunction function = AggFunction::Sum;
  std::string input;
  Duration window = 0;

  friend bool operator==(const AggSpec&, const AggSpec&) = default;
};

struct RowExpr {
  std::string output;
  ExprPtr expr;

  friend bool operator==(const RowExpr& a, const RowExpr& b) {
    return a.output == b.output && expr_equal(a.expr, b.expr);
  }
};

struct DslProgram {
  std::vector<std::string> group_keys;  // empty: use the entity index columns
  std::string timestamp_column;         // empty: use the source timestamp column
  std::vector<AggSpec> aggregations;
  std::vector<RowExpr> row_exprs;

  std::vector<std::string> output_names() const;
  Duration max_window() const;

  friend bool operator==(const DslProgram&, const DslProgram&) = default;
};

/// Throws DslParseError carrying line, column and the expected-token set.
DslProgram parse(std::string_view text);
std::string pretty_print(const DslProgram& program);
std::string pretty_print(const ExprPtr& expr);

struct BindOptions {
  Schema source_schema;
  std::vector<Column> index_columns;
  std::string source_timestamp_column;
  std::string output_timestamp_column;
  Duration emit_interval = 0;
};

// Expression operands resolve to slots: aggregation outputs (explicit, then implicit `latest`
// columns for bare source references), or earlier expression outputs.
struct BoundOperand {
  enum class Kind { Aggregation, Expression } kind;
  size_t slot;
};

struct BoundNode {
  enum class Kind { Literal, Operand, Negate, Binary } kind;
  Scalar literal;
  BoundOperand operand{BoundOperand::Kind::Aggregation, 0};
  BinaryOp op = BinaryOp::Add;
  size_t lhs = 0;  // child node index; Negate uses lhs only
  size_t rhs = 0;
  ScalarType type = ScalarType::Int64;
};

/// Flattened expression; children precede their parents, the root is the last node.
struct BoundExpr {
  std::vector<BoundNode> nodes;
  ScalarType type() const { return nodes.back().type; }
};

struct BoundAggregation {
  AggSpec spec;
  size_t input_index;
  ScalarType input_type;
  ScalarType output_type;
};

struct BoundProgram {
  DslProgram program;
  BindOptions options;
  std::vector<size_t> group_indices;  // source columns, in index column order
  size_t timestamp_index = 0;
  std::vector<BoundAggregation> aggregations;  // explicit first, then implicit latest
  size_t explicit_aggregations = 0;
  std::vector<BoundExpr> expressions;
  Duration lookback = 0;  // max aggregation window, or the emit interval when there are none
  Schema output_schema;
};

/// Resolves every column reference. Throws UnknownColumn, TypeMismatch or SchemaConflict.
BoundProgram bind(const DslProgram& program, const BindOptions& options);

/// Runs the bound program with a per-group sliding-window scan. A (group, t) row is emitted for
/// every aligned t in `window` such that the group has a source row in [t - lookback, t).
/// Rows whose group key holds a null are ignored.
Frame execute(const BoundProgram& bound, const Frame& source, FeatureWindow window);

}  // namespace fstore::dsl
