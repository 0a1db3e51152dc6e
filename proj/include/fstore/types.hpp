#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace fstore {

/// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
/// Milliseconds.
using Duration = std::int64_t;

inline constexpr Duration kMinute = 60'000;
inline constexpr Duration kHour = 60 * kMinute;
inline constexpr Duration kDay = 24 * kHour;

enum class ScalarType { String, Int64, Float64 };

std::string_view to_string(ScalarType type);
ScalarType scalar_type_from_string(std::string_view text);

/// A cell value. monostate is SQL-style null.
using Scalar = std::variant<std::monostate, std::int64_t, double, std::string>;

inline bool is_null(const Scalar& v) { return std::holds_alternative<std::monostate>(v); }
std::optional<ScalarType> type_of(const Scalar& v);
std::string scalar_to_display(const Scalar& v);

/// Ordered (column, value) pairs; order is the declaration order of the owning schema.
using NamedValues = std::vector<std::pair<std::string, Scalar>>;

/// Half-open interval [start_ts, end_ts) on the event-time axis.
struct FeatureWindow {
  Timestamp start_ts = 0;
  Timestamp end_ts = 0;

  bool valid() const { return start_ts >= 0 && start_ts < end_ts; }
  bool contains(Timestamp ts) const { return ts >= start_ts && ts < end_ts; }
  bool overlaps(const FeatureWindow& other) const {
    return start_ts < other.end_ts && other.start_ts < end_ts;
  }
  Duration width() const { return end_ts - start_ts; }

  friend bool operator==(const FeatureWindow&, const FeatureWindow&) = default;
  friend auto operator<=>(const FeatureWindow&, const FeatureWindow&) = default;
};

std::string to_string(const FeatureWindow& w);

/// A (name, version) reference to a registered asset.
struct AssetRef {
  std::string name;
  int version = 0;

  friend bool operator==(const AssetRef&, const AssetRef&) = default;
  friend auto operator<=>(const AssetRef&, const AssetRef&) = default;
};

using FeatureSetRef = AssetRef;
using EntityRef = AssetRef;

std::string to_string(const AssetRef& ref);

/// Asset names double as directory names: [A-Za-z0-9_][A-Za-z0-9_-]*, at most 128 chars.
bool is_valid_asset_name(std::string_view name);
/// Column names: [A-Za-z0-9_]+ and not purely numeric, so they never read as DSL literals.
bool is_valid_column_name(std::string_view name);

}  // namespace fstore
