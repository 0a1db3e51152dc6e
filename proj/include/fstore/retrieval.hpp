#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fstore/codec.hpp"
#include "fstore/compute.hpp"
#include "fstore/interval_set.hpp"
#include "fstore/offline_store.hpp"
#include "fstore/online_store.hpp"
#include "fstore/registry.hpp"

namespace fstore {

inline constexpr std::string_view kObservationTsColumn = "observation_ts";

struct SpineRow {
  Timestamp observation_ts = 0;
  std::vector<Scalar> values;  // parallel to ObservationSpine::columns; missing cells are null
};

/// Observation rows driving a point-in-time join: ids of the requested entities plus any
/// passthrough columns, each stamped with the observation time.
struct ObservationSpine {
  std::vector<std::string> columns;  // excludes observation_ts, in order of first appearance
  std::vector<SpineRow> rows;

  std::optional<size_t> column_index(std::string_view name) const;
  void add_row(Timestamp observation_ts, const NamedValues& values);

  /// One JSON object per line; `observation_ts` must be an integer on every row.
  static ObservationSpine from_jsonl(const std::string& text, const std::string& origin = "spine");
};

struct FeatureRequest {
  FeatureSetRef fsv;
  std::vector<std::string> features;  // empty means every declared feature
};

/// Parses "name:version:f1,f2" (the feature list may be omitted).
FeatureRequest parse_feature_request(std::string_view text);

enum class CellStatus { Value, NoData, NotMaterialized };
std::string_view to_string(CellStatus status);

struct Cell {
  CellStatus status = CellStatus::NoData;
  Scalar value;
  // identity of the record the value came from, kept for auditing
  std::optional<Timestamp> event_ts;
  std::optional<Timestamp> creation_ts;

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct ResultColumn {
  FeatureSetRef fsv;
  std::string feature;
  ScalarType type = ScalarType::Float64;
  Duration source_delay = 0;
};

struct RetrievalResult {
  ObservationSpine spine;
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Cell>> cells;  // [spine row][column]

  Json row_to_json(size_t row) const;
  /// Spine columns, then per feature `<name>` (value or null) and `<name>__status`.
  std::string to_jsonl() const;
};

struct OnlineFeature {
  FeatureSetRef fsv;
  std::string feature;
  std::optional<Scalar> value;           // set when the key has a live record
  std::optional<MissingReason> missing;  // set otherwise
  std::optional<Timestamp> event_ts;
  std::optional<Timestamp> creation_ts;
};

Json to_json(const std::vector<OnlineFeature>& features);

using DataStateLookup = std::function<IntervalSet(const FeatureSetRef&)>;

class Retriever {
 public:
  Retriever(const Registry& registry, const OfflineStore& offline, const OnlineStore& online,
            const FeatureCalculator& calculator, DataStateLookup data_state);

  /// Point-in-time join: per spine row and feature set, the record with the greatest
  /// (event_ts, creation_ts) among those with event_ts < observation_ts - source_delay (and
  /// creation_ts <= as_of when given). Without a record, the cell is no_data when the instant
  /// just before the cutoff is materialized, not_materialized otherwise.
  RetrievalResult get_offline_features(const ObservationSpine& spine, const std::vector<FeatureRequest>& requests,
                                       std::optional<Timestamp> as_of = std::nullopt) const;

  /// Same join over records calculated on the fly for [0, latest cutoff) of each feature set.
  RetrievalResult get_offline_features_unmaterialized(const ObservationSpine& spine,
                                                      const std::vector<FeatureRequest>& requests) const;

  std::vector<OnlineFeature> get_online_features(const std::vector<FeatureRequest>& requests, const NamedValues& ids,
                                                 Timestamp now) const;

 private:
  struct Plan;
  Plan plan(const ObservationSpine& spine, const std::vector<FeatureRequest>& requests) const;

  const Registry& registry_;
  const OfflineStore& offline_;
  const OnlineStore& online_;
  const FeatureCalculator& calculator_;
  DataStateLookup data_state_;
};

/// Every value cell whose record is not strictly older than observation_ts - source_delay.
std::vector<std::string> audit_leakage(const RetrievalResult& result);

}  // namespace fstore
