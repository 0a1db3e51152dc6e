#include "fstore/consistency.hpp"

#include <map>

#include "fstore/error.hpp"

namespace fstore {

std::string_view to_string(BootstrapDirection d) {
  return d == BootstrapDirection::OfflineToOnline ? "offline-to-online" : "online-to-offline";
}

BootstrapDirection bootstrap_direction_from_string(std::string_view text) {
  if (text == "offline-to-online") return BootstrapDirection::OfflineToOnline;
  if (text == "online-to-offline") return BootstrapDirection::OnlineToOffline;
  raise(ErrorKind::InvalidArgument, "direction must be offline-to-online or online-to-offline");
}

BootstrapReport bootstrap_offline_to_online(const OfflineStore& offline, OnlineStore& online, const FeatureSetRef& fsv,
                                            std::optional<Duration> ttl) {
  std::vector<FeatureRecord> latest = offline.latest_per_id(fsv);
  BootstrapReport report;
  report.records_read = latest.size();
  if (latest.empty()) return report;
  OnlineMergeReport m = online.merge_online(fsv, latest, ttl);
  report.records_applied = m.inserted + m.overridden;
  return report;
}

BootstrapReport bootstrap_online_to_offline(const OnlineStore& online, OfflineStore& offline, const FeatureSetRef& fsv) {
  std::vector<FeatureRecord> records;
  for (auto& e : online.entries(fsv)) records.push_back(std::move(e.record));
  BootstrapReport report;
  report.records_read = records.size();
  if (records.empty()) return report;
  report.records_applied = offline.merge_offline(fsv, records).inserted;
  return report;
}

ConsistencyReport check_consistency(const OfflineStore& offline, const OnlineStore& online, const FeatureSetRef& fsv,
                                    Timestamp now, std::optional<Duration> ttl) {
  std::map<std::string, Divergence> by_key;
  for (auto& r : offline.latest_per_id(fsv)) {
    std::string key = canonical_key(r.ids);
    auto& d = by_key[key];
    d.key = key;
    if (!ttl || now < r.creation_ts + *ttl) d.offline = std::move(r);
  }
  for (auto& e : online.entries(fsv)) {
    auto& d = by_key[e.key];
    d.key = e.key;
    if (!e.expired(now)) d.online = std::move(e.record);
  }

  ConsistencyReport report;
  report.fsv = fsv;
  report.now = now;
  report.keys_checked = by_key.size();
  for (auto& [key, d] : by_key) {
    if (d.offline != d.online) report.divergences.push_back(std::move(d));
  }
  return report;
}

Json ConsistencyReport::to_json() const {
  auto side = [](const std::optional<FeatureRecord>& r) -> Json {
    if (!r) return nullptr;
    return Json{{"event_ts", r->event_ts}, {"creation_ts", r->creation_ts}};
  };
  Json j = Json::object();
  j["feature_set"] = fsv.name;
  j["version"] = fsv.version;
  j["now"] = now;
  j["keys_checked"] = keys_checked;
  j["consistent"] = consistent();
  Json divs = Json::array();
  for (const auto& d : divergences) {
    Json entry = Json::object();
    std::string printable = d.key;
    for (char& c : printable) {
      if (c == kIdSeparator) c = '|';
    }
    entry["key"] = printable;
    entry["offline"] = side(d.offline);
    entry["online"] = side(d.online);
    divs.push_back(entry);
  }
  j["divergences"] = divs;
  return j;
}

}  // namespace fstore
