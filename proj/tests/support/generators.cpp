#include "generators.hpp"

namespace fstore::testing {

Frame random_transactions(Rng& rng, size_t rows, Timestamp max_ts, int customers) {
  Frame f;
  f.schema = {{"ts", ScalarType::Int64},
              {"customer_id", ScalarType::String},
              {"qty", ScalarType::Int64},
              {"price", ScalarType::Float64}};
  for (size_t i = 0; i < rows; ++i) {
    Row r(4);
    r[0] = uniform(rng, 0, max_ts);
    if (!chance(rng, 0.03)) r[1] = "c" + std::to_string(uniform(rng, 0, customers - 1));
    // the first row always carries both numbers so column types are never unknown
    if (i == 0 || !chance(rng, 0.1)) r[2] = uniform(rng, -50, 200);
    if (i == 0 || !chance(rng, 0.1)) r[3] = static_cast<double>(uniform(rng, -5000, 20000)) / 100.0;
    f.rows.push_back(std::move(r));
  }
  return f;
}

std::vector<Json> frame_to_json(const Frame& frame) {
  std::vector<Json> out;
  for (const auto& row : frame.rows) {
    Json j = Json::object();
    for (size_t c = 0; c < frame.schema.size(); ++c) j[frame.schema[c].name] = scalar_to_json(row[c]);
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

using dsl::AggFunction;
using dsl::BinaryOp;
using dsl::Expr;
using dsl::ExprPtr;

ExprPtr random_literal(Rng& rng) {
  if (chance(rng, 0.5)) return Expr::literal(static_cast<std::int64_t>(uniform(rng, 1, 9)));
  return Expr::literal(static_cast<double>(uniform(rng, 1, 9999)) / 100.0);
}

ExprPtr random_expr(Rng& rng, const std::vector<std::string>& names, int depth) {
  if (depth == 0 || chance(rng, 0.3)) {
    if (chance(rng, 0.25)) return random_literal(rng);
    return Expr::column(names[uniform(rng, 0, static_cast<std::int64_t>(names.size()) - 1)]);
  }
  if (chance(rng, 0.15)) return Expr::negate(random_expr(rng, names, depth - 1));
  auto op = static_cast<BinaryOp>(uniform(rng, 0, 3));
  ExprPtr lhs = random_expr(rng, names, depth - 1);
  ExprPtr rhs = random_expr(rng, names, depth - 1);
  return Expr::binary(op, lhs, rhs);
}

}  // namespace

dsl::DslProgram random_program(Rng& rng, int max_aggs, int max_window_minutes) {
  dsl::DslProgram p;
  if (chance(rng, 0.5)) p.group_keys = {"customer_id"};
  if (chance(rng, 0.5)) p.timestamp_column = "ts";
  const char* inputs[] = {"qty", "price"};
  int aggs = static_cast<int>(uniform(rng, 0, max_aggs));
  for (int i = 0; i < aggs; ++i) {
    dsl::AggSpec a;
    a.output = "a" + std::to_string(i + 1);
    a.function = static_cast<AggFunction>(uniform(rng, 0, 5));
    a.input = inputs[uniform(rng, 0, 1)];
    a.window = uniform(rng, 1, max_window_minutes) * kMinute;
    p.aggregations.push_back(a);
  }
  int exprs = static_cast<int>(uniform(rng, aggs == 0 ? 1 : 0, 2));
  std::vector<std::string> names = {"qty", "price"};
  for (const auto& a : p.aggregations) names.push_back(a.output);
  for (int i = 0; i < exprs; ++i) {
    dsl::RowExpr e;
    e.output = "e" + std::to_string(i + 1);
    e.expr = random_expr(rng, names, 3);
    p.row_exprs.push_back(e);
    names.push_back(e.output);
  }
  return p;
}

}  // namespace fstore::testing
