#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "fstore/record.hpp"
#include "fstore/types.hpp"

namespace fstore {

struct OfflineMergeReport {
  size_t inserted = 0;
  size_t skipped = 0;

  friend bool operator==(const OfflineMergeReport&, const OfflineMergeReport&) = default;
};

/// UTC calendar day of an event timestamp, formatted YYYY-MM-DD.
std::string event_day(Timestamp ts);

/// Append-only store keeping every record version, partitioned by UTC event day.
///
/// On disk: <root>/offline/<fs>/<version>/date=<YYYY-MM-DD>/part-<hash>.jsonl holds one
/// partition's records sorted by (ids, event_ts, creation_ts); manifest.json lists the live part
/// file of each partition. A merge writes fresh part files for the partitions it touches and then
/// swaps the manifest, so a failed merge leaves the previous manifest, and every partition, intact.
/// Part files are named by content hash, which makes the bytes on disk independent of merge order.
class OfflineStore {
 public:
  explicit OfflineStore(std::optional<std::filesystem::path> root = std::nullopt);

  /// Inserts each record whose (ids, event_ts, creation_ts) is absent; existing keys are no-ops.
  OfflineMergeReport merge_offline(const FeatureSetRef& fsv, std::span<const FeatureRecord> records);

  /// Records with event_ts in `window` (all when absent), optionally restricted to one id
  /// combination, sorted by (ids, event_ts, creation_ts).
  std::vector<FeatureRecord> scan_offline(const FeatureSetRef& fsv, std::optional<FeatureWindow> window = std::nullopt,
                                          const std::optional<NamedValues>& ids = std::nullopt) const;

  /// Per id combination, the record maximizing (event_ts, creation_ts), considering only records
  /// with creation_ts <= as_of when given. Sorted by ids.
  std::vector<FeatureRecord> latest_per_id(const FeatureSetRef& fsv,
                                           std::optional<Timestamp> as_of = std::nullopt) const;

  size_t record_count(const FeatureSetRef& fsv) const;

  /// Called with each file path before it is written; throwing simulates an I/O failure.
  void set_write_fault_for_testing(std::function<void(const std::filesystem::path&)> hook);

 private:
  struct Partition {
    std::string file;  // relative to the feature set directory
    std::vector<FeatureRecord> records;
  };
  struct Table {
    std::shared_mutex mu;
    std::map<std::string, Partition> partitions;  // by event day
    std::unordered_set<std::string> keys;
  };

  Table& table(const FeatureSetRef& fsv) const;
  void load(const FeatureSetRef& fsv, Table& t) const;
  std::filesystem::path table_dir(const FeatureSetRef& fsv) const;

  std::optional<std::filesystem::path> root_;
  mutable std::mutex tables_mu_;
  mutable std::map<FeatureSetRef, std::unique_ptr<Table>> tables_;
  std::function<void(const std::filesystem::path&)> write_fault_;
};

}  // namespace fstore
