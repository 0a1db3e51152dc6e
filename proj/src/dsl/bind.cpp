#include <algorithm>
#include <map>
#include <set>

#include "fstore/dsl.hpp"
#include "fstore/error.hpp"

namespace fstore::dsl {

namespace {

bool numeric(ScalarType t) { return t == ScalarType::Int64 || t == ScalarType::Float64; }

const Column& require_column(const Schema& schema, const std::string& name, size_t* index) {
  for (size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) {
      *index = i;
      return schema[i];
    }
  }
  raise(ErrorKind::UnknownColumn, "source has no column '" + name + "'");
}

class ExprBinder {
 public:
  ExprBinder(BoundProgram& bp, std::map<std::string, size_t>& expr_slots)
      : bp_(bp), expr_slots_(expr_slots) {
    for (size_t i = 0; i < bp_.aggregations.size(); ++i) agg_slots_[bp_.aggregations[i].spec.output] = i;
  }

  size_t bind(const Expr& e, BoundExpr& out) {
    BoundNode node{};
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Expr::Literal>) {
            node.kind = BoundNode::Kind::Literal;
            node.literal = n.value;
            node.type = *type_of(n.value);
          } else if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
            node.kind = BoundNode::Kind::Operand;
            node.operand = resolve(n.name, &node.type);
          } else if constexpr (std::is_same_v<T, Expr::Negate>) {
            node.kind = BoundNode::Kind::Negate;
            node.lhs = bind(*n.operand, out);
            node.type = out.nodes[node.lhs].type;
          } else {
            node.kind = BoundNode::Kind::Binary;
            node.op = n.op;
            node.lhs = bind(*n.lhs, out);
            node.rhs = bind(*n.rhs, out);
            bool ints = out.nodes[node.lhs].type == ScalarType::Int64 &&
                        out.nodes[node.rhs].type == ScalarType::Int64;
            node.type = (ints && n.op != BinaryOp::Div) ? ScalarType::Int64 : ScalarType::Float64;
          }
        },
        e.node());
    out.nodes.push_back(std::move(node));
    return out.nodes.size() - 1;
  }

 private:
  BoundOperand resolve(const std::string& name, ScalarType* type) {
    if (auto it = agg_slots_.find(name); it != agg_slots_.end()) {
      *type = checked_numeric(name, bp_.aggregations[it->second].output_type);
      return {BoundOperand::Kind::Aggregation, it->second};
    }
    if (auto it = expr_slots_.find(name); it != expr_slots_.end()) {
      *type = bp_.expressions[it->second].type();
      return {BoundOperand::Kind::Expression, it->second};
    }
    // bare source column: the group's latest value inside the lookback
    size_t idx = 0;
    const Column& col = require_column(bp_.options.source_schema, name, &idx);
    *type = checked_numeric(name, col.type);
    auto [it, inserted] = implicit_.try_emplace(name, bp_.aggregations.size());
    if (inserted) {
      AggSpec spec{"", AggFunction::Latest, name, bp_.lookback};
      bp_.aggregations.push_back({spec, idx, col.type, col.type});
    }
    return {BoundOperand::Kind::Aggregation, it->second};
  }

  static ScalarType checked_numeric(const std::string& name, ScalarType t) {
    if (!numeric(t)) raise(ErrorKind::TypeMismatch, "'" + name + "' is not numeric");
    return t;
  }

  BoundProgram& bp_;
  std::map<std::string, size_t>& expr_slots_;
  std::map<std::string, size_t> agg_slots_;
  std::map<std::string, size_t> implicit_;
};

}  // namespace

BoundProgram bind(const DslProgram& program, const BindOptions& options) {
  if (options.emit_interval <= 0) raise(ErrorKind::InvalidArgument, "emit interval must be positive");
  if (options.index_columns.empty()) raise(ErrorKind::InvalidArgument, "no index columns to group by");

  BoundProgram bp;
  bp.program = program;
  bp.options = options;
  const Schema& src = options.source_schema;

  const std::string& ts_name =
      program.timestamp_column.empty() ? options.source_timestamp_column : program.timestamp_column;
  if (require_column(src, ts_name, &bp.timestamp_index).type != ScalarType::Int64) {
    raise(ErrorKind::TypeMismatch, "timestamp column '" + ts_name + "' must be int64");
  }

  if (!program.group_keys.empty()) {
    std::set<std::string> given(program.group_keys.begin(), program.group_keys.end());
    std::set<std::string> wanted;
    for (const auto& c : options.index_columns) wanted.insert(c.name);
    if (given != wanted || given.size() != program.group_keys.size()) {
      raise(ErrorKind::SchemaConflict, "group keys must be exactly the entity index columns");
    }
  }
  for (const auto& ic : options.index_columns) {
    size_t idx = 0;
    const Column& col = require_column(src, ic.name, &idx);
    if (col.type != ic.type) {
      raise(ErrorKind::TypeMismatch, "index column '" + ic.name + "' is " +
                                         std::string(to_string(col.type)) + " in the source, declared " +
                                         std::string(to_string(ic.type)));
    }
    bp.group_indices.push_back(idx);
  }

  std::set<std::string> reserved{options.output_timestamp_column};
  for (const auto& c : options.index_columns) reserved.insert(c.name);
  for (const auto& name : program.output_names()) {
    if (reserved.count(name)) {
      raise(ErrorKind::SchemaConflict, "output '" + name + "' collides with an index or timestamp column");
    }
  }

  for (const auto& spec : program.aggregations) {
    if (spec.window <= 0) raise(ErrorKind::InvalidArgument, "window of '" + spec.output + "' must be positive");
    size_t idx = 0;
    const Column& col = require_column(src, spec.input, &idx);
    ScalarType out = col.type;
    switch (spec.function) {
      case AggFunction::Sum:
      case AggFunction::Min:
      case AggFunction::Max:
        if (!numeric(col.type)) raise(ErrorKind::TypeMismatch, std::string(to_string(spec.function)) + "(" + spec.input + ") needs a numeric column");
        break;
      case AggFunction::Avg:
        if (!numeric(col.type)) raise(ErrorKind::TypeMismatch, "avg(" + spec.input + ") needs a numeric column");
        out = ScalarType::Float64;
        break;
      case AggFunction::Count: out = ScalarType::Int64; break;
      case AggFunction::Latest: break;
    }
    bp.aggregations.push_back({spec, idx, col.type, out});
  }
  bp.explicit_aggregations = bp.aggregations.size();
  bp.lookback = program.aggregations.empty() ? options.emit_interval : program.max_window();

  std::map<std::string, size_t> expr_slots;
  ExprBinder binder(bp, expr_slots);
  for (const auto& re : program.row_exprs) {
    BoundExpr be;
    binder.bind(*re.expr, be);
    bp.expressions.push_back(std::move(be));
    expr_slots[re.output] = bp.expressions.size() - 1;
  }

  for (const auto& ic : options.index_columns) bp.output_schema.push_back(ic);
  bp.output_schema.push_back({options.output_timestamp_column, ScalarType::Int64});
  for (size_t i = 0; i < bp.explicit_aggregations; ++i) {
    bp.output_schema.push_back({bp.aggregations[i].spec.output, bp.aggregations[i].output_type});
  }
  for (size_t i = 0; i < program.row_exprs.size(); ++i) {
    bp.output_schema.push_back({program.row_exprs[i].output, bp.expressions[i].type()});
  }
  return bp;
}

}  // namespace fstore::dsl
