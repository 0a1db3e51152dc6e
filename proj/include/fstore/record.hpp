#pragma once

#include <string>
#include <tuple>

#include "fstore/types.hpp"

namespace fstore {

/// One materialized feature-set row. (ids, event_ts, creation_ts) is unique per feature set version.
struct FeatureRecord {
  NamedValues ids;
  Timestamp event_ts = 0;
  Timestamp creation_ts = 0;
  NamedValues features;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

inline constexpr char kIdSeparator = '\x1f';

/// Index values joined in entity column order with the unit separator. Shared by the
/// offline and online stores so both sides agree on key identity byte-for-byte.
std::string canonical_key(const NamedValues& ids);

/// Total order used for storage: (ids, event_ts, creation_ts).
bool record_key_less(const FeatureRecord& a, const FeatureRecord& b);
bool same_record_key(const FeatureRecord& a, const FeatureRecord& b);

/// The "latest" order: lexicographic (event_ts, creation_ts).
inline std::tuple<Timestamp, Timestamp> recency(const FeatureRecord& r) {
  return {r.event_ts, r.creation_ts};
}

/// Rejects null or separator-bearing ids, empty ids, and creation_ts <= event_ts.
void validate_record(const FeatureRecord& r);

}  // namespace fstore
