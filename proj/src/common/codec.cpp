#include "fstore/codec.hpp"

#include <sstream>

#include "fstore/error.hpp"

namespace fstore {

Json scalar_to_json(const Scalar& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

Scalar scalar_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return std::monostate{};
    case Json::value_t::number_integer: return j.get<std::int64_t>();
    case Json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(INT64_MAX)) {
        raise(ErrorKind::InvalidArgument, "integer out of int64 range: " + j.dump());
      }
      return static_cast<std::int64_t>(u);
    }
    case Json::value_t::number_float: return j.get<double>();
    case Json::value_t::string: return j.get<std::string>();
    default: raise(ErrorKind::InvalidArgument, "not a scalar value: " + j.dump());
  }
}

Json named_values_to_json(const NamedValues& values) {
  Json obj = Json::object();
  for (const auto& [name, v] : values) obj[name] = scalar_to_json(v);
  return obj;
}

NamedValues named_values_from_json(const Json& j) {
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "expected an object, got " + j.dump());
  NamedValues out;
  out.reserve(j.size());
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), scalar_from_json(*it));
  return out;
}

Json record_to_json(const FeatureRecord& r) {
  Json j = Json::object();
  j["ids"] = named_values_to_json(r.ids);
  j["event_ts"] = r.event_ts;
  j["creation_ts"] = r.creation_ts;
  j["features"] = named_values_to_json(r.features);
  return j;
}

FeatureRecord record_from_json(const Json& j) {
  FeatureRecord r;
  r.ids = named_values_from_json(require_field(j, "ids"));
  r.event_ts = require_int(j, "event_ts");
  r.creation_ts = require_int(j, "creation_ts");
  r.features = named_values_from_json(require_field(j, "features"));
  return r;
}

Json window_to_json(const FeatureWindow& w) {
  return Json{{"start_ts", w.start_ts}, {"end_ts", w.end_ts}};
}

FeatureWindow window_from_json(const Json& j) {
  return FeatureWindow{require_int(j, "start_ts"), require_int(j, "end_ts")};
}

const Json& require_field(const Json& obj, const char* field) {
  if (!obj.is_object()) raise(ErrorKind::InvalidSpec, "expected an object around '" + std::string(field) + "'");
  auto it = obj.find(field);
  if (it == obj.end()) raise(ErrorKind::InvalidSpec, "missing field '" + std::string(field) + "'");
  return *it;
}

std::int64_t require_int(const Json& obj, const char* field) {
  const Json& v = require_field(obj, field);
  if (!v.is_number_integer()) raise(ErrorKind::InvalidSpec, "field '" + std::string(field) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string require_string(const Json& obj, const char* field) {
  const Json& v = require_field(obj, field);
  if (!v.is_string()) raise(ErrorKind::InvalidSpec, "field '" + std::string(field) + "' must be a string");
  return v.get<std::string>();
}

bool require_bool(const Json& obj, const char* field) {
  const Json& v = require_field(obj, field);
  if (!v.is_boolean()) raise(ErrorKind::InvalidSpec, "field '" + std::string(field) + "' must be a boolean");
  return v.get<bool>();
}

std::string to_jsonl(const std::vector<Json>& lines) {
  std::string out;
  for (const auto& j : lines) {
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Json> parse_jsonl(const std::string& text, const std::string& origin) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      raise(ErrorKind::InvalidArgument,
            origin + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
  }
  return out;
}

}  // namespace fstore
