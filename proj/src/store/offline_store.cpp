#include "fstore/offline_store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "fstore/codec.hpp"
#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

namespace {

std::string full_key(const FeatureRecord& r) {
  return canonical_key(r.ids) + '\x1e' + std::to_string(r.event_ts) + '\x1e' + std::to_string(r.creation_ts);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string encode_partition(const std::vector<FeatureRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

bool ids_match(const FeatureRecord& r, const NamedValues& ids) {
  return canonical_key(r.ids) == canonical_key(ids);
}

}  // namespace

std::string event_day(Timestamp ts) {
  using namespace std::chrono;
  auto day = floor<days>(sys_time<milliseconds>(milliseconds(ts)));
  year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

OfflineStore::OfflineStore(std::optional<fsys::path> root) : root_(std::move(root)) {}

void OfflineStore::set_write_fault_for_testing(std::function<void(const fsys::path&)> hook) {
  write_fault_ = std::move(hook);
}

fsys::path OfflineStore::table_dir(const FeatureSetRef& fsv) const {
  return *root_ / "offline" / fsv.name / std::to_string(fsv.version);
}

OfflineStore::Table& OfflineStore::table(const FeatureSetRef& fsv) const {
  std::lock_guard lock(tables_mu_);
  auto& slot = tables_[fsv];
  if (!slot) {
    auto t = std::make_unique<Table>();
    if (root_) load(fsv, *t);
    slot = std::move(t);
  }
  return *slot;
}

void OfflineStore::load(const FeatureSetRef& fsv, Table& t) const {
  fsys::path manifest = table_dir(fsv) / "manifest.json";
  if (!fsys::exists(manifest)) return;
  Json doc = Json::parse(read_file(manifest));
  for (const auto& p : require_field(doc, "partitions")) {
    Partition part;
    part.file = require_string(p, "file");
    for (const auto& line : parse_jsonl(read_file(table_dir(fsv) / part.file), part.file)) {
      part.records.push_back(record_from_json(line));
      t.keys.insert(full_key(part.records.back()));
    }
    t.partitions.emplace(require_string(p, "date"), std::move(part));
  }
}

OfflineMergeReport OfflineStore::merge_offline(const FeatureSetRef& fsv, std::span<const FeatureRecord> records) {
  for (const auto& r : records) validate_record(r);
  Table& t = table(fsv);
  std::unique_lock lock(t.mu);

  OfflineMergeReport report;
  std::unordered_set<std::string> batch_keys;
  std::map<std::string, std::vector<FeatureRecord>> fresh;  // by event day
  std::vector<std::string> fresh_keys;
  for (const auto& r : records) {
    std::string key = full_key(r);
    if (t.keys.count(key) || !batch_keys.insert(key).second) {
      ++report.skipped;
      continue;
    }
    fresh[event_day(r.event_ts)].push_back(r);
    fresh_keys.push_back(std::move(key));
    ++report.inserted;
  }
  if (fresh.empty()) return report;

  std::map<std::string, Partition> rewritten;
  for (auto& [day, add] : fresh) {
    Partition next;
    auto it = t.partitions.find(day);
    if (it != t.partitions.end()) next.records = it->second.records;
    next.records.insert(next.records.end(), add.begin(), add.end());
    std::sort(next.records.begin(), next.records.end(), record_key_less);
    rewritten.emplace(day, std::move(next));
  }

  if (root_) {
    fsys::path dir = table_dir(fsv);
    std::vector<fsys::path> written;
    auto rollback = [&] {
      std::error_code ec;
      for (const auto& p : written) fsys::remove(p, ec);
    };
    try {
      for (auto& [day, part] : rewritten) {
        std::string bytes = encode_partition(part.records);
        char name[40];
        std::snprintf(name, sizeof(name), "part-%016llx.jsonl", static_cast<unsigned long long>(fnv1a(bytes)));
        part.file = "date=" + day + "/" + name;
        fsys::path path = dir / part.file;
        if (write_fault_) write_fault_(path);
        atomic_write_file(path, bytes);
        written.push_back(path);
      }
      Json manifest = Json::object();
      manifest["feature_set"] = fsv.name;
      manifest["version"] = fsv.version;
      Json parts = Json::array();
      for (const auto& [day, part] : t.partitions) {
        const Partition& live = rewritten.count(day) ? rewritten.at(day) : part;
        parts.push_back(Json{{"date", day}, {"file", live.file}, {"records", live.records.size()}});
      }
      for (const auto& [day, part] : rewritten) {
        if (!t.partitions.count(day)) parts.push_back(Json{{"date", day}, {"file", part.file}, {"records", part.records.size()}});
      }
      std::sort(parts.begin(), parts.end(), [](const Json& a, const Json& b) { return a["date"] < b["date"]; });
      manifest["partitions"] = parts;
      fsys::path manifest_path = dir / "manifest.json";
      if (write_fault_) write_fault_(manifest_path);
      atomic_write_file(manifest_path, manifest.dump(2) + "\n");
    } catch (const Error& e) {
      rollback();
      raise(ErrorKind::StoreIoError, std::string("offline merge rolled back: ") + e.what());
    } catch (const std::exception& e) {
      rollback();
      raise(ErrorKind::StoreIoError, std::string("offline merge rolled back: ") + e.what());
    }
    // superseded part files are unreachable from the manifest now
    std::error_code ec;
    for (const auto& [day, part] : rewritten) {
      auto it = t.partitions.find(day);
      if (it != t.partitions.end() && it->second.file != part.file) fsys::remove(dir / it->second.file, ec);
    }
  }

  for (auto& [day, part] : rewritten) t.partitions[day] = std::move(part);
  for (auto& k : fresh_keys) t.keys.insert(std::move(k));
  return report;
}

std::vector<FeatureRecord> OfflineStore::scan_offline(const FeatureSetRef& fsv, std::optional<FeatureWindow> window,
                                                      const std::optional<NamedValues>& ids) const {
  Table& t = table(fsv);
  std::shared_lock lock(t.mu);
  std::vector<FeatureRecord> out;
  for (const auto& [day, part] : t.partitions) {
    for (const auto& r : part.records) {
      if (window && !window->contains(r.event_ts)) continue;
      if (ids && !ids_match(r, *ids)) continue;
      out.push_back(r);
    }
  }
  std::sort(out.begin(), out.end(), record_key_less);
  return out;
}

std::vector<FeatureRecord> OfflineStore::latest_per_id(const FeatureSetRef& fsv, std::optional<Timestamp> as_of) const {
  Table& t = table(fsv);
  std::shared_lock lock(t.mu);
  std::map<std::string, const FeatureRecord*> best;
  for (const auto& [day, part] : t.partitions) {
    for (const auto& r : part.records) {
      if (as_of && r.creation_ts > *as_of) continue;
      auto [it, inserted] = best.try_emplace(canonical_key(r.ids), &r);
      if (!inserted && recency(*it->second) < recency(r)) it->second = &r;
    }
  }
  std::vector<FeatureRecord> out;
  out.reserve(best.size());
  for (const auto& [key, r] : best) out.push_back(*r);
  std::sort(out.begin(), out.end(), record_key_less);
  return out;
}

size_t OfflineStore::record_count(const FeatureSetRef& fsv) const {
  Table& t = table(fsv);
  std::shared_lock lock(t.mu);
  return t.keys.size();
}

}  // namespace fstore
