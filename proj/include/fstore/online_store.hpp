#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fstore/record.hpp"
#include "fstore/types.hpp"

namespace fstore {

struct OnlineEntry {
  std::string key;
  FeatureRecord record;
  std::optional<Timestamp> expires_at;  // creation_ts + ttl

  bool expired(Timestamp now) const { return expires_at && now >= *expires_at; }
  friend bool operator==(const OnlineEntry&, const OnlineEntry&) = default;
};

struct OnlineMergeReport {
  size_t inserted = 0;
  size_t overridden = 0;
  size_t noop = 0;

  friend bool operator==(const OnlineMergeReport&, const OnlineMergeReport&) = default;
};

enum class MissingReason { NeverMaterialized, Expired };
std::string_view to_string(MissingReason reason);

struct Missing {
  MissingReason reason;
  friend bool operator==(const Missing&, const Missing&) = default;
};

using OnlineLookup = std::variant<FeatureRecord, Missing>;

/// Latest record per id combination. In memory, with every mutating merge written through to
/// <root>/online/<fs>/<version>/snapshot.jsonl (one entry per line, sorted by key) and reloaded
/// on first access.
class OnlineStore {
 public:
  explicit OnlineStore(std::optional<std::filesystem::path> root = std::nullopt);

  /// Per record: an absent key inserts; a greater event_ts, or an equal event_ts with a greater
  /// creation_ts, overrides; anything else, including exact (event_ts, creation_ts) ties, is a
  /// no-op. Expired entries compare like live ones. expires_at = creation_ts + ttl when a ttl is given.
  OnlineMergeReport merge_online(const FeatureSetRef& fsv, std::span<const FeatureRecord> records,
                                 std::optional<Duration> ttl = std::nullopt);

  OnlineLookup get_online(const FeatureSetRef& fsv, const NamedValues& ids, Timestamp now) const;

  /// Every stored entry, expired or not, sorted by key.
  std::vector<OnlineEntry> entries(const FeatureSetRef& fsv) const;

 private:
  using EntryMap = std::unordered_map<std::string, OnlineEntry>;
  struct Table {
    mutable std::shared_mutex mu;
    EntryMap entries;
  };

  Table& table(const FeatureSetRef& fsv) const;
  void load(const FeatureSetRef& fsv, Table& t) const;
  void write_snapshot(const FeatureSetRef& fsv, const EntryMap& entries) const;

  std::optional<std::filesystem::path> root_;
  mutable std::mutex tables_mu_;
  mutable std::map<FeatureSetRef, std::unique_ptr<Table>> tables_;
};

}  // namespace fstore
