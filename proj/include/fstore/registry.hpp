#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fstore/codec.hpp"
#include "fstore/frame.hpp"
#include "fstore/types.hpp"

namespace fstore {

struct EntityDef {
  std::string name;
  int version = 0;
  std::vector<Column> index_columns;  // string or int64 only
  std::string description;

  EntityRef ref() const { return {name, version}; }
  friend bool operator==(const EntityDef&, const EntityDef&) = default;
};

struct SourceDef {
  std::string path;  // directory of JSON-lines files; relative paths resolve against the store root
  std::string timestamp_column;
  Duration source_lookback = 0;
  Duration source_delay = 0;

  friend bool operator==(const SourceDef&, const SourceDef&) = default;
};

enum class TransformKind { Dsl, Opaque };

struct TransformDef {
  TransformKind kind = TransformKind::Dsl;
  std::string dsl_program;  // set iff kind == Dsl
  std::string opaque_id;    // set iff kind == Opaque

  friend bool operator==(const TransformDef&, const TransformDef&) = default;
};

struct MaterializationPolicy {
  bool offline_enabled = false;
  bool online_enabled = false;
  Duration schedule_interval = kDay;
  std::optional<Duration> ttl;
  Duration materialization_delay = 0;

  bool any_sink() const { return offline_enabled || online_enabled; }
  friend bool operator==(const MaterializationPolicy&, const MaterializationPolicy&) = default;
};

struct FeatureSetSpec {
  std::string name;
  int version = 0;
  std::vector<EntityRef> entities;
  SourceDef source;
  TransformDef transformation;
  std::vector<Column> features;
  std::string timestamp_column;
  MaterializationPolicy materialization;  // mutable
  std::string description;                // mutable

  FeatureSetRef ref() const { return {name, version}; }
  friend bool operator==(const FeatureSetSpec&, const FeatureSetSpec&) = default;
};

/// Only the mutable properties of a feature set version. Absent members are left unchanged.
struct FeatureSetPatch {
  struct Policy {
    std::optional<bool> offline_enabled;
    std::optional<bool> online_enabled;
    std::optional<Duration> schedule_interval;
    std::optional<std::optional<Duration>> ttl;
    std::optional<Duration> materialization_delay;
  };
  std::optional<std::string> description;
  std::optional<Policy> materialization;

  /// Throws ImmutableFieldChange if the document names any immutable field.
  static FeatureSetPatch from_json(const Json& j);
};

Json to_json(const EntityDef& e);
EntityDef entity_from_json(const Json& j);
Json to_json(const FeatureSetSpec& s);
FeatureSetSpec feature_set_from_json(const Json& j);
Json to_json(const MaterializationPolicy& p);
MaterializationPolicy policy_from_json(const Json& j);

/// Versioned asset metadata. Writes are serialized and land as one JSON document per asset
/// under <root>/registry/<kind>/<name>/<version>, published by atomic rename.
class Registry {
 public:
  explicit Registry(std::optional<std::filesystem::path> root = std::nullopt);

  EntityDef register_entity(const EntityDef& def);
  EntityDef get_entity(const std::string& name, int version) const;
  std::vector<EntityDef> list_entities() const;

  FeatureSetSpec register_feature_set(const FeatureSetSpec& spec);
  FeatureSetSpec update_feature_set(const std::string& name, int version, const FeatureSetPatch& patch);
  FeatureSetSpec get_feature_set(const std::string& name, int version) const;
  FeatureSetSpec get_feature_set(const FeatureSetRef& ref) const { return get_feature_set(ref.name, ref.version); }
  std::vector<FeatureSetSpec> list_feature_sets(std::string_view name_prefix = {}) const;

  /// Index columns of all referenced entities, concatenated in reference order.
  std::vector<Column> index_columns(const FeatureSetSpec& spec) const;

 private:
  void load();
  void persist(const std::string& kind, const std::string& name, int version, const Json& doc) const;

  std::optional<std::filesystem::path> root_;
  mutable std::shared_mutex mu_;
  std::map<EntityRef, EntityDef> entities_;
  std::map<FeatureSetRef, FeatureSetSpec> feature_sets_;
};

}  // namespace fstore
