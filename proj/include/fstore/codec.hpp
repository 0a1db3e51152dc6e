#pragma once

// Canonical record encoding: UTF-8 JSON with insertion-ordered keys, durations and
// timestamps as integer milliseconds.

#include <string>
#include <vector>

#include <json.hpp>

#include "fstore/record.hpp"
#include "fstore/types.hpp"

namespace fstore {

using Json = nlohmann::ordered_json;

Json scalar_to_json(const Scalar& v);
/// Integers map to int64, other numbers to float64; arrays and objects are rejected.
Scalar scalar_from_json(const Json& j);

Json named_values_to_json(const NamedValues& values);
NamedValues named_values_from_json(const Json& j);

Json record_to_json(const FeatureRecord& r);
FeatureRecord record_from_json(const Json& j);

Json window_to_json(const FeatureWindow& w);
FeatureWindow window_from_json(const Json& j);

/// Typed field access with InvalidSpec errors naming the missing/ill-typed field.
const Json& require_field(const Json& obj, const char* field);
std::int64_t require_int(const Json& obj, const char* field);
std::string require_string(const Json& obj, const char* field);
bool require_bool(const Json& obj, const char* field);

std::string to_jsonl(const std::vector<Json>& lines);
std::vector<Json> parse_jsonl(const std::string& text, const std::string& origin);

}  // namespace fstore
