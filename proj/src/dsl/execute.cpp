#include <algorithm>
#include <deque>
#include <map>

#include "fstore/dsl.hpp"
#include "fstore/error.hpp"

namespace fstore::dsl {

namespace {

// int64 arithmetic wraps instead of invoking undefined behaviour on overflow
std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

double as_double(const Scalar& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

Timestamp floor_div(Timestamp a, Duration b) {
  Timestamp q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

struct GroupRows {
  std::vector<size_t> rows;  // source row indices, stable-sorted by timestamp
  std::vector<Timestamp> ts;
};

// Aligned output timestamps t in `window` with some row in [t - lookback, t),
// i.e. ts < t <= ts + lookback for some row ts.
std::vector<Timestamp> emission_times(const std::vector<Timestamp>& ts, Duration lookback,
                                      Duration interval, FeatureWindow window) {
  std::vector<Timestamp> out;
  Timestamp next_free = window.start_ts;  // first candidate t not yet emitted
  for (Timestamp row_ts : ts) {
    Timestamp lo = std::max({row_ts + 1, next_free, window.start_ts});
    Timestamp hi = std::min(row_ts + lookback, window.end_ts - 1);
    if (lo > hi) continue;
    Timestamp t = floor_div(lo + interval - 1, interval) * interval;
    for (; t <= hi; t += interval) out.push_back(t);
    next_free = std::max(next_free, hi + 1);
  }
  return out;
}

class AggregationScan {
 public:
  AggregationScan(const BoundAggregation& agg, const Frame& source, const GroupRows& group)
      : agg_(agg), source_(source), group_(group) {}

  // Must be called with non-decreasing t.
  Scalar at(Timestamp t) {
    const Timestamp lo_ts = t - agg_.spec.window;
    while (hi_ < group_.ts.size() && group_.ts[hi_] < t) push(hi_++);
    while (lo_ < hi_ && group_.ts[lo_] < lo_ts) pop(lo_++);
    return value();
  }

 private:
  const Scalar& input(size_t k) const { return source_.rows[group_.rows[k]][agg_.input_index]; }

  void push(size_t k) {
    const Scalar& v = input(k);
    if (is_null(v)) return;
    ++count_;
    if (auto* i = std::get_if<std::int64_t>(&v)) int_sum_ = wrap_add(int_sum_, *i);
    if (agg_.spec.function == AggFunction::Min || agg_.spec.function == AggFunction::Max) {
      bool is_min = agg_.spec.function == AggFunction::Min;
      while (!mono_.empty()) {
        const Scalar& back = input(mono_.back());
        bool dominated = is_min ? !(back < v) : !(v < back);
        if (!dominated) break;
        mono_.pop_back();
      }
      mono_.push_back(k);
    }
  }

  void pop(size_t k) {
    const Scalar& v = input(k);
    if (is_null(v)) return;
    --count_;
    if (auto* i = std::get_if<std::int64_t>(&v)) int_sum_ = wrap_sub(int_sum_, *i);
    if (!mono_.empty() && mono_.front() == k) mono_.pop_front();
  }

  // Float sums are re-added over the live slice rather than maintained by subtraction, so the
  // result carries no cancellation drift from rows that have left the window.
  double float_sum() const {
    double s = 0.0;
    for (size_t k = lo_; k < hi_; ++k) {
      if (auto* d = std::get_if<double>(&input(k))) s += *d;
    }
    return s;
  }

  Scalar sum_value() const {
    if (agg_.input_type == ScalarType::Int64) return int_sum_;
    return float_sum();
  }

  Scalar value() const {
    switch (agg_.spec.function) {
      case AggFunction::Count: return static_cast<std::int64_t>(count_);
      case AggFunction::Sum: return sum_value();
      case AggFunction::Avg:
        if (count_ == 0) return std::monostate{};
        return as_double(sum_value()) / static_cast<double>(count_);
      case AggFunction::Min:
      case AggFunction::Max:
        if (mono_.empty()) return std::monostate{};
        return input(mono_.front());
      case AggFunction::Latest:
        // last non-null row inside the window; rows are stable-sorted, so ties on
        // timestamp resolve to the later source row
        if (count_ == 0) return std::monostate{};
        return input(latest_index());
    }
    return std::monostate{};
  }

  size_t latest_index() const {
    size_t k = hi_;
    while (k > lo_) {
      --k;
      if (!is_null(input(k))) return k;
    }
    return lo_;
  }

  const BoundAggregation& agg_;
  const Frame& source_;
  const GroupRows& group_;
  size_t lo_ = 0;
  size_t hi_ = 0;
  size_t count_ = 0;
  std::int64_t int_sum_ = 0;
  std::deque<size_t> mono_;
};

Scalar evaluate(const BoundExpr& e, const std::vector<Scalar>& agg_values,
                const std::vector<Scalar>& expr_values) {
  std::vector<Scalar> vals(e.nodes.size());
  for (size_t i = 0; i < e.nodes.size(); ++i) {
    const BoundNode& n = e.nodes[i];
    switch (n.kind) {
      case BoundNode::Kind::Literal: vals[i] = n.literal; break;
      case BoundNode::Kind::Operand:
        vals[i] = n.operand.kind == BoundOperand::Kind::Aggregation ? agg_values[n.operand.slot]
                                                                     : expr_values[n.operand.slot];
        break;
      case BoundNode::Kind::Negate: {
        const Scalar& v = vals[n.lhs];
        if (is_null(v)) break;
        if (n.type == ScalarType::Int64) {
          vals[i] = wrap_sub(0, std::get<std::int64_t>(v));
        } else {
          vals[i] = -as_double(v);
        }
        break;
      }
      case BoundNode::Kind::Binary: {
        const Scalar& a = vals[n.lhs];
        const Scalar& b = vals[n.rhs];
        if (is_null(a) || is_null(b)) break;
        if (n.type == ScalarType::Int64) {
          auto x = std::get<std::int64_t>(a);
          auto y = std::get<std::int64_t>(b);
          switch (n.op) {
            case BinaryOp::Add: vals[i] = wrap_add(x, y); break;
            case BinaryOp::Sub: vals[i] = wrap_sub(x, y); break;
            case BinaryOp::Mul: vals[i] = wrap_mul(x, y); break;
            case BinaryOp::Div: break;  // never int-typed
          }
        } else {
          double x = as_double(a);
          double y = as_double(b);
          switch (n.op) {
            case BinaryOp::Add: vals[i] = x + y; break;
            case BinaryOp::Sub: vals[i] = x - y; break;
            case BinaryOp::Mul: vals[i] = x * y; break;
            case BinaryOp::Div:
              if (y != 0.0) vals[i] = x / y;
              break;
          }
        }
        break;
      }
    }
  }
  return vals.back();
}

}  // namespace

Frame execute(const BoundProgram& bp, const Frame& source, FeatureWindow window) {
  if (source.schema != bp.options.source_schema) {
    raise(ErrorKind::TypeMismatch, "source schema differs from the schema the program was bound to");
  }
  source.check_well_formed();

  std::map<std::vector<Scalar>, GroupRows> groups;
  for (size_t r = 0; r < source.rows.size(); ++r) {
    const Row& row = source.rows[r];
    std::vector<Scalar> key;
    key.reserve(bp.group_indices.size());
    bool null_key = false;
    for (size_t gi : bp.group_indices) {
      null_key |= is_null(row[gi]);
      key.push_back(row[gi]);
    }
    if (null_key || is_null(row[bp.timestamp_index])) continue;
    groups[std::move(key)].rows.push_back(r);
  }

  Frame out;
  out.schema = bp.output_schema;
  for (auto& [key, group] : groups) {
    std::stable_sort(group.rows.begin(), group.rows.end(), [&](size_t a, size_t b) {
      return std::get<std::int64_t>(source.rows[a][bp.timestamp_index]) <
             std::get<std::int64_t>(source.rows[b][bp.timestamp_index]);
    });
    group.ts.reserve(group.rows.size());
    for (size_t r : group.rows) group.ts.push_back(std::get<std::int64_t>(source.rows[r][bp.timestamp_index]));

    std::vector<AggregationScan> scans;
    scans.reserve(bp.aggregations.size());
    for (const auto& agg : bp.aggregations) scans.emplace_back(agg, source, group);

    for (Timestamp t : emission_times(group.ts, bp.lookback, bp.options.emit_interval, window)) {
      std::vector<Scalar> agg_values;
      agg_values.reserve(scans.size());
      for (auto& s : scans) agg_values.push_back(s.at(t));
      std::vector<Scalar> expr_values;
      expr_values.reserve(bp.expressions.size());
      for (const auto& e : bp.expressions) expr_values.push_back(evaluate(e, agg_values, expr_values));

      Row row = key;
      row.push_back(t);
      for (size_t i = 0; i < bp.explicit_aggregations; ++i) row.push_back(agg_values[i]);
      for (auto& v : expr_values) row.push_back(std::move(v));
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace fstore::dsl
