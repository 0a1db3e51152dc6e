#include <algorithm>
#include <cctype>

#include "fstore/error.hpp"
#include "fstore/frame.hpp"
#include "fstore/record.hpp"
#include "fstore/types.hpp"

namespace fstore {

std::string_view to_string(ScalarType type) {
  switch (type) {
    case ScalarType::String: return "string";
    case ScalarType::Int64: return "int64";
    case ScalarType::Float64: return "float64";
  }
  return "?";
}

ScalarType scalar_type_from_string(std::string_view text) {
  if (text == "string") return ScalarType::String;
  if (text == "int64") return ScalarType::Int64;
  if (text == "float64") return ScalarType::Float64;
  raise(ErrorKind::InvalidSpec, "unknown scalar type '" + std::string(text) + "'");
}

std::optional<ScalarType> type_of(const Scalar& v) {
  switch (v.index()) {
    case 1: return ScalarType::Int64;
    case 2: return ScalarType::Float64;
    case 3: return ScalarType::String;
    default: return std::nullopt;
  }
}

std::string scalar_to_display(const Scalar& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&v)) return std::to_string(*d);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  return "null";
}

std::string to_string(const FeatureWindow& w) {
  return "[" + std::to_string(w.start_ts) + ", " + std::to_string(w.end_ts) + ")";
}

std::string to_string(const AssetRef& ref) { return ref.name + ":" + std::to_string(ref.version); }

bool is_valid_asset_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name.front() == '-') return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

bool is_valid_column_name(std::string_view name) {
  if (name.empty() || name.size() > 128) return false;
  bool all_digits = true;
  for (unsigned char c : name) {
    if (!(std::isalnum(c) || c == '_')) return false;
    if (!std::isdigit(c)) all_digits = false;
  }
  return !all_digits;
}

std::string canonical_key(const NamedValues& ids) {
  std::string key;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) key.push_back(kIdSeparator);
    const Scalar& v = ids[i].second;
    if (auto* n = std::get_if<std::int64_t>(&v)) {
      key += std::to_string(*n);
    } else if (auto* s = std::get_if<std::string>(&v)) {
      key += *s;
    } else {
      raise(ErrorKind::InvalidRecord, "index column '" + ids[i].first + "' must be string or int64");
    }
  }
  return key;
}

namespace {

bool ids_less(const NamedValues& a, const NamedValues& b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(),
      [](const auto& x, const auto& y) { return x.second < y.second; });
}

bool ids_equal(const NamedValues& a, const NamedValues& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                    [](const auto& x, const auto& y) { return x.second == y.second; });
}

}  // namespace

bool record_key_less(const FeatureRecord& a, const FeatureRecord& b) {
  if (!ids_equal(a.ids, b.ids)) return ids_less(a.ids, b.ids);
  return recency(a) < recency(b);
}

bool same_record_key(const FeatureRecord& a, const FeatureRecord& b) {
  return ids_equal(a.ids, b.ids) && a.event_ts == b.event_ts && a.creation_ts == b.creation_ts;
}

void validate_record(const FeatureRecord& r) {
  if (r.ids.empty()) raise(ErrorKind::InvalidRecord, "record has no index values");
  for (const auto& [col, v] : r.ids) {
    auto* s = std::get_if<std::string>(&v);
    if (s && s->find(kIdSeparator) != std::string::npos) {
      raise(ErrorKind::InvalidRecord, "index value of '" + col + "' contains the key separator");
    }
    if (!s && !std::holds_alternative<std::int64_t>(v)) {
      raise(ErrorKind::InvalidRecord, "index column '" + col + "' is null or non-integral");
    }
  }
  if (r.creation_ts <= r.event_ts) {
    raise(ErrorKind::InvalidRecord, "creation_ts " + std::to_string(r.creation_ts) +
                                        " must be greater than event_ts " +
                                        std::to_string(r.event_ts));
  }
}

std::optional<size_t> Frame::column_index(const std::string& name) const {
  for (size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  return std::nullopt;
}

void Frame::check_well_formed() const {
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      raise(ErrorKind::TypeMismatch, "row " + std::to_string(r) + " has " +
                                         std::to_string(rows[r].size()) + " cells, schema has " +
                                         std::to_string(schema.size()));
    }
    for (size_t c = 0; c < schema.size(); ++c) {
      auto t = type_of(rows[r][c]);
      if (t && *t != schema[c].type) {
        raise(ErrorKind::TypeMismatch, "row " + std::to_string(r) + " column '" + schema[c].name +
                                           "' holds " + std::string(to_string(*t)) + ", expected " +
                                           std::string(to_string(schema[c].type)));
      }
    }
  }
}

}  // namespace fstore
