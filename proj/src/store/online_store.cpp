#include "fstore/online_store.hpp"

#include <algorithm>

#include "fstore/codec.hpp"
#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

std::string_view to_string(MissingReason reason) {
  return reason == MissingReason::Expired ? "expired" : "never_materialized";
}

OnlineStore::OnlineStore(std::optional<fsys::path> root) : root_(std::move(root)) {}

OnlineStore::Table& OnlineStore::table(const FeatureSetRef& fsv) const {
  std::lock_guard lock(tables_mu_);
  auto& slot = tables_[fsv];
  if (!slot) {
    auto t = std::make_unique<Table>();
    if (root_) load(fsv, *t);
    slot = std::move(t);
  }
  return *slot;
}

void OnlineStore::load(const FeatureSetRef& fsv, Table& t) const {
  fsys::path path = *root_ / "online" / fsv.name / std::to_string(fsv.version) / "snapshot.jsonl";
  if (!fsys::exists(path)) return;
  for (const auto& line : parse_jsonl(read_file(path), path.string())) {
    OnlineEntry e;
    e.key = require_string(line, "key");
    e.record = record_from_json(require_field(line, "record"));
    if (line.contains("expires_at") && !line["expires_at"].is_null()) e.expires_at = require_int(line, "expires_at");
    t.entries.emplace(e.key, std::move(e));
  }
}

void OnlineStore::write_snapshot(const FeatureSetRef& fsv, const EntryMap& entries) const {
  if (!root_) return;
  std::vector<const OnlineEntry*> sorted;
  sorted.reserve(entries.size());
  for (const auto& [k, e] : entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->key < b->key; });
  std::string bytes;
  for (const auto* e : sorted) {
    Json j = Json::object();
    j["key"] = e->key;
    j["record"] = record_to_json(e->record);
    j["expires_at"] = e->expires_at ? Json(*e->expires_at) : Json(nullptr);
    bytes += j.dump();
    bytes.push_back('\n');
  }
  atomic_write_file(*root_ / "online" / fsv.name / std::to_string(fsv.version) / "snapshot.jsonl", bytes);
}

OnlineMergeReport OnlineStore::merge_online(const FeatureSetRef& fsv, std::span<const FeatureRecord> records,
                                            std::optional<Duration> ttl) {
  for (const auto& r : records) validate_record(r);
  Table& t = table(fsv);
  std::unique_lock lock(t.mu);

  OnlineMergeReport report;
  // when persistent, changes are applied to a copy published only once the snapshot is durable
  EntryMap scratch;
  if (root_) scratch = t.entries;
  EntryMap& next = root_ ? scratch : t.entries;
  for (const auto& r : records) {
    OnlineEntry incoming{canonical_key(r.ids), r, std::nullopt};
    if (ttl) incoming.expires_at = r.creation_ts + *ttl;
    // an expired entry still takes part in the comparison, so an older record never replaces a
    // newer one that merely aged out
    auto it = next.find(incoming.key);
    if (it == next.end()) {
      next.insert_or_assign(incoming.key, std::move(incoming));
      ++report.inserted;
    } else if (recency(it->second.record) < recency(r)) {
      it->second = std::move(incoming);
      ++report.overridden;
    } else {
      ++report.noop;
    }
  }
  if (report.inserted + report.overridden == 0) return report;
  if (!root_) return report;
  try {
    write_snapshot(fsv, next);
  } catch (const Error& e) {
    raise(ErrorKind::StoreIoError, std::string("online merge not applied: ") + e.what());
  }
  t.entries = std::move(scratch);
  return report;
}

OnlineLookup OnlineStore::get_online(const FeatureSetRef& fsv, const NamedValues& ids, Timestamp now) const {
  Table& t = table(fsv);
  std::shared_lock lock(t.mu);
  auto it = t.entries.find(canonical_key(ids));
  if (it == t.entries.end()) return Missing{MissingReason::NeverMaterialized};
  if (it->second.expired(now)) return Missing{MissingReason::Expired};
  return it->second.record;
}

std::vector<OnlineEntry> OnlineStore::entries(const FeatureSetRef& fsv) const {
  Table& t = table(fsv);
  std::shared_lock lock(t.mu);
  std::vector<OnlineEntry> out;
  out.reserve(t.entries.size());
  for (const auto& [k, e] : t.entries) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

}  // namespace fstore
