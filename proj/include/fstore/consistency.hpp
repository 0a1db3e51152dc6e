#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fstore/codec.hpp"
#include "fstore/offline_store.hpp"
#include "fstore/online_store.hpp"

namespace fstore {

enum class BootstrapDirection { OfflineToOnline, OnlineToOffline };
std::string_view to_string(BootstrapDirection d);
BootstrapDirection bootstrap_direction_from_string(std::string_view text);

struct BootstrapReport {
  size_t records_read = 0;
  size_t records_applied = 0;  // inserted or overridden on the target side
};

/// Merges offline latest_per_id into the online store through merge_online, so TTL stamping
/// and tie rules apply exactly as for materialization.
BootstrapReport bootstrap_offline_to_online(const OfflineStore& offline, OnlineStore& online, const FeatureSetRef& fsv,
                                            std::optional<Duration> ttl);

/// Merges every online entry's record, expired or not, into the offline store.
BootstrapReport bootstrap_online_to_offline(const OnlineStore& online, OfflineStore& offline, const FeatureSetRef& fsv);

struct Divergence {
  std::string key;
  std::optional<FeatureRecord> offline;  // expected: offline latest, if unexpired
  std::optional<FeatureRecord> online;   // actual: unexpired online entry
};

struct ConsistencyReport {
  FeatureSetRef fsv;
  Timestamp now = 0;
  size_t keys_checked = 0;
  std::vector<Divergence> divergences;

  bool consistent() const { return divergences.empty(); }
  Json to_json() const;
};

/// Compares each key's unexpired online entry with the offline latest record. Keys whose offline
/// latest has expired at `now` (creation_ts + ttl) and that have no live online entry agree.
ConsistencyReport check_consistency(const OfflineStore& offline, const OnlineStore& online, const FeatureSetRef& fsv,
                                    Timestamp now, std::optional<Duration> ttl);

}  // namespace fstore
