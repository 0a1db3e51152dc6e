#include "fstore/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>

#include "fstore/error.hpp"

namespace fstore {

std::optional<size_t> ObservationSpine::column_index(std::string_view name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

void ObservationSpine::add_row(Timestamp observation_ts, const NamedValues& values) {
  SpineRow row;
  row.observation_ts = observation_ts;
  row.values.resize(columns.size());
  for (const auto& [name, value] : values) {
    if (name == kObservationTsColumn) raise(ErrorKind::InvalidArgument, "observation_ts is passed separately");
    auto idx = column_index(name);
    if (!idx) {
      columns.push_back(name);
      for (auto& r : rows) r.values.emplace_back();
      row.values.emplace_back();
      idx = columns.size() - 1;
    }
    row.values[*idx] = value;
  }
  rows.push_back(std::move(row));
}

ObservationSpine ObservationSpine::from_jsonl(const std::string& text, const std::string& origin) {
  ObservationSpine spine;
  std::vector<Json> lines = parse_jsonl(text, origin);
  for (size_t i = 0; i < lines.size(); ++i) {
    const Json& obj = lines[i];
    std::string where = origin + " row " + std::to_string(i + 1);
    if (!obj.is_object()) raise(ErrorKind::InvalidArgument, where + ": expected a JSON object");
    auto ts = obj.find(kObservationTsColumn);
    if (ts == obj.end() || !ts->is_number_integer()) {
      raise(ErrorKind::InvalidArgument, where + ": observation_ts must be an integer");
    }
    NamedValues values;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (it.key() == kObservationTsColumn) continue;
      if (it->is_structured()) raise(ErrorKind::InvalidArgument, where + ": column '" + it.key() + "' is not a scalar");
      values.emplace_back(it.key(), scalar_from_json(*it));
    }
    spine.add_row(ts->get<Timestamp>(), values);
  }
  return spine;
}

FeatureRequest parse_feature_request(std::string_view text) {
  auto bad = [&] { raise(ErrorKind::InvalidArgument, "feature request '" + std::string(text) + "' is not name:version[:f1,f2]"); };
  size_t c1 = text.find(':');
  if (c1 == std::string_view::npos || c1 == 0) bad();
  size_t c2 = text.find(':', c1 + 1);
  std::string_view version = text.substr(c1 + 1, c2 == std::string_view::npos ? std::string_view::npos : c2 - c1 - 1);
  FeatureRequest req;
  req.fsv.name = std::string(text.substr(0, c1));
  auto [ptr, ec] = std::from_chars(version.data(), version.data() + version.size(), req.fsv.version);
  if (ec != std::errc{} || ptr != version.data() + version.size() || version.empty()) bad();
  if (c2 != std::string_view::npos) {
    std::string_view rest = text.substr(c2 + 1);
    if (rest.empty()) bad();
    while (!rest.empty()) {
      size_t comma = rest.find(',');
      std::string_view name = rest.substr(0, comma);
      if (name.empty()) bad();
      req.features.emplace_back(name);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
      if (rest.empty()) bad();
    }
  }
  return req;
}

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Value: return "value";
    case CellStatus::NoData: return "no_data";
    case CellStatus::NotMaterialized: return "not_materialized";
  }
  return "?";
}

Json RetrievalResult::row_to_json(size_t row) const {
  const SpineRow& r = spine.rows.at(row);
  Json j = Json::object();
  j[std::string(kObservationTsColumn)] = r.observation_ts;
  for (size_t c = 0; c < spine.columns.size(); ++c) j[spine.columns[c]] = scalar_to_json(r.values[c]);
  for (size_t c = 0; c < columns.size(); ++c) {
    const Cell& cell = cells[row][c];
    j[columns[c].feature] = scalar_to_json(cell.value);
    j[columns[c].feature + "__status"] = to_string(cell.status);
  }
  return j;
}

std::string RetrievalResult::to_jsonl() const {
  std::vector<Json> lines;
  lines.reserve(spine.rows.size());
  for (size_t i = 0; i < spine.rows.size(); ++i) lines.push_back(row_to_json(i));
  return fstore::to_jsonl(lines);
}

Json to_json(const std::vector<OnlineFeature>& features) {
  Json out = Json::object();
  for (const auto& f : features) {
    Json cell = Json::object();
    cell["feature_set"] = to_string(f.fsv);
    if (f.value) {
      cell["value"] = scalar_to_json(*f.value);
      cell["event_ts"] = *f.event_ts;
      cell["creation_ts"] = *f.creation_ts;
    } else {
      cell["value"] = nullptr;
      cell["missing"] = to_string(*f.missing);
    }
    out[f.feature] = cell;
  }
  return out;
}

namespace {

Scalar feature_value(const FeatureRecord& r, const std::string& name) {
  for (const auto& [n, v] : r.features) {
    if (n == name) return v;
  }
  return {};
}

// Records of one feature set grouped by id key, each group sorted by (event_ts, creation_ts).
class RecordIndex {
 public:
  explicit RecordIndex(std::vector<FeatureRecord> records) : records_(std::move(records)) {
    for (const auto& r : records_) by_key_[canonical_key(r.ids)].push_back(&r);
    for (auto& [key, list] : by_key_) {
      std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) { return recency(*a) < recency(*b); });
    }
  }

  const FeatureRecord* nearest_past(const std::string& key, Timestamp cutoff, std::optional<Timestamp> as_of) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return nullptr;
    const auto& list = it->second;
    auto end = std::lower_bound(list.begin(), list.end(), cutoff,
                                [](const FeatureRecord* r, Timestamp c) { return r->event_ts < c; });
    // walking back in descending (event_ts, creation_ts) order, the first admissible record wins
    for (auto r = end; r != list.begin();) {
      --r;
      if (!as_of || (*r)->creation_ts <= *as_of) return *r;
    }
    return nullptr;
  }

 private:
  std::vector<FeatureRecord> records_;
  std::unordered_map<std::string, std::vector<const FeatureRecord*>> by_key_;
};

}  // namespace

struct Retriever::Plan {
  struct Group {
    FeatureSetSpec spec;
    std::vector<std::pair<std::string, size_t>> ids;       // index column -> spine column
    std::vector<std::pair<size_t, std::string>> outputs;  // result column -> feature
  };
  std::vector<Group> groups;
  std::vector<ResultColumn> columns;
};

Retriever::Retriever(const Registry& registry, const OfflineStore& offline, const OnlineStore& online,
                     const FeatureCalculator& calculator, DataStateLookup data_state)
    : registry_(registry), offline_(offline), online_(online), calculator_(calculator), data_state_(std::move(data_state)) {}

Retriever::Plan Retriever::plan(const ObservationSpine& spine, const std::vector<FeatureRequest>& requests) const {
  Plan p;
  std::set<std::string> taken(spine.columns.begin(), spine.columns.end());
  taken.insert(std::string(kObservationTsColumn));
  for (const auto& req : requests) {
    Plan::Group g;
    g.spec = registry_.get_feature_set(req.fsv);
    for (const auto& col : registry_.index_columns(g.spec)) {
      auto idx = spine.column_index(col.name);
      if (!idx) {
        raise(ErrorKind::EntityMismatch, "spine lacks index column '" + col.name + "' of " + to_string(req.fsv));
      }
      g.ids.emplace_back(col.name, *idx);
    }
    std::vector<std::string> names = req.features;
    if (names.empty()) {
      for (const auto& f : g.spec.features) names.push_back(f.name);
    }
    for (const auto& name : names) {
      auto f = std::find_if(g.spec.features.begin(), g.spec.features.end(), [&](const Column& c) { return c.name == name; });
      if (f == g.spec.features.end()) raise(ErrorKind::UnknownFeature, to_string(req.fsv) + " has no feature '" + name + "'");
      if (!taken.insert(name).second) {
        raise(ErrorKind::SchemaConflict, "result column '" + name + "' would appear twice");
      }
      g.outputs.emplace_back(p.columns.size(), name);
      p.columns.push_back({req.fsv, name, f->type, g.spec.source.source_delay});
    }
    p.groups.push_back(std::move(g));
  }
  return p;
}

namespace {

std::string spine_key(const ObservationSpine& spine, size_t row,
                      const std::vector<std::pair<std::string, size_t>>& ids) {
  NamedValues values;
  for (const auto& [name, idx] : ids) {
    const Scalar& v = spine.rows[row].values[idx];
    if (!std::holds_alternative<std::string>(v) && !std::holds_alternative<std::int64_t>(v)) {
      raise(ErrorKind::EntityMismatch,
            "spine row " + std::to_string(row + 1) + " has no string or integer value for '" + name + "'");
    }
    values.emplace_back(name, v);
  }
  return canonical_key(values);
}

template <typename Covered>
void join(const ObservationSpine& spine, const std::vector<std::pair<std::string, size_t>>& ids,
          const std::vector<std::pair<size_t, std::string>>& outputs, Duration delay, const RecordIndex& index,
          std::optional<Timestamp> as_of, Covered covered, RetrievalResult& result) {
  for (size_t row = 0; row < spine.rows.size(); ++row) {
    const Timestamp cutoff = spine.rows[row].observation_ts - delay;
    const FeatureRecord* rec = index.nearest_past(spine_key(spine, row, ids), cutoff, as_of);
    for (const auto& [col, feature] : outputs) {
      Cell& cell = result.cells[row][col];
      if (rec) {
        cell.status = CellStatus::Value;
        cell.value = feature_value(*rec, feature);
        cell.event_ts = rec->event_ts;
        cell.creation_ts = rec->creation_ts;
      } else {
        // nothing can precede time zero, so an empty past counts as materialized
        cell.status = cutoff <= 0 || covered(cutoff - 1) ? CellStatus::NoData : CellStatus::NotMaterialized;
      }
    }
  }
}

RetrievalResult empty_result(const ObservationSpine& spine, std::vector<ResultColumn> columns) {
  RetrievalResult result;
  result.spine = spine;
  result.columns = std::move(columns);
  result.cells.assign(spine.rows.size(), std::vector<Cell>(result.columns.size()));
  return result;
}

}  // namespace

RetrievalResult Retriever::get_offline_features(const ObservationSpine& spine,
                                                const std::vector<FeatureRequest>& requests,
                                                std::optional<Timestamp> as_of) const {
  Plan p = plan(spine, requests);
  RetrievalResult result = empty_result(spine, p.columns);
  for (const auto& g : p.groups) {
    const FeatureSetRef fsv = g.spec.ref();
    RecordIndex index(offline_.scan_offline(fsv));
    IntervalSet state = data_state_ ? data_state_(fsv) : IntervalSet{};
    join(spine, g.ids, g.outputs, g.spec.source.source_delay, index, as_of,
         [&](Timestamp ts) { return state.contains(ts); }, result);
  }
  return result;
}

RetrievalResult Retriever::get_offline_features_unmaterialized(const ObservationSpine& spine,
                                                               const std::vector<FeatureRequest>& requests) const {
  Plan p = plan(spine, requests);
  RetrievalResult result = empty_result(spine, p.columns);
  for (const auto& g : p.groups) {
    const Duration delay = g.spec.source.source_delay;
    Timestamp max_cutoff = 0;
    for (const auto& row : spine.rows) max_cutoff = std::max(max_cutoff, row.observation_ts - delay);
    std::vector<FeatureRecord> records;
    if (max_cutoff > 0) records = calculator_.calculate(g.spec, {0, max_cutoff}, max_cutoff);
    RecordIndex index(std::move(records));
    join(spine, g.ids, g.outputs, delay, index, std::nullopt, [](Timestamp) { return true; }, result);
  }
  return result;
}

std::vector<OnlineFeature> Retriever::get_online_features(const std::vector<FeatureRequest>& requests,
                                                          const NamedValues& ids, Timestamp now) const {
  ObservationSpine probe;
  probe.add_row(now, ids);
  Plan p = plan(probe, requests);
  std::vector<OnlineFeature> out(p.columns.size());
  for (const auto& g : p.groups) {
    NamedValues key;
    for (const auto& [name, idx] : g.ids) key.emplace_back(name, probe.rows[0].values[idx]);
    spine_key(probe, 0, g.ids);  // rejects null or float ids with EntityMismatch
    OnlineLookup found = online_.get_online(g.spec.ref(), key, now);
    for (const auto& [col, feature] : g.outputs) {
      OnlineFeature& f = out[col];
      f.fsv = g.spec.ref();
      f.feature = feature;
      if (auto* rec = std::get_if<FeatureRecord>(&found)) {
        f.value = feature_value(*rec, feature);
        f.event_ts = rec->event_ts;
        f.creation_ts = rec->creation_ts;
      } else {
        f.missing = std::get<Missing>(found).reason;
      }
    }
  }
  return out;
}

std::vector<std::string> audit_leakage(const RetrievalResult& result) {
  std::vector<std::string> violations;
  for (size_t row = 0; row < result.cells.size(); ++row) {
    const Timestamp ts0 = result.spine.rows[row].observation_ts;
    for (size_t c = 0; c < result.columns.size(); ++c) {
      const Cell& cell = result.cells[row][c];
      if (cell.status != CellStatus::Value) continue;
      const auto& col = result.columns[c];
      std::string where = "row " + std::to_string(row + 1) + " column '" + col.feature + "'";
      if (!cell.event_ts) {
        violations.push_back(where + ": value without a source record");
      } else if (*cell.event_ts >= ts0 - col.source_delay) {
        violations.push_back(where + ": event_ts " + std::to_string(*cell.event_ts) + " is not before " +
                             std::to_string(ts0) + " - " + std::to_string(col.source_delay));
      }
    }
  }
  return violations;
}

}  // namespace fstore
