#include "fstore/registry.hpp"

#include <mutex>
#include <set>

#include "fstore/dsl.hpp"
#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

namespace {

constexpr const char* kEntityKind = "entity";
constexpr const char* kFeatureSetKind = "featureset";

Json columns_to_json(const std::vector<Column>& cols) {
  Json arr = Json::array();
  for (const auto& c : cols) arr.push_back(Json{{"name", c.name}, {"type", std::string(to_string(c.type))}});
  return arr;
}

std::vector<Column> columns_from_json(const Json& j, const char* field) {
  const Json& arr = require_field(j, field);
  if (!arr.is_array()) raise(ErrorKind::InvalidSpec, std::string("'") + field + "' must be an array");
  std::vector<Column> out;
  for (const auto& c : arr) out.push_back({require_string(c, "name"), scalar_type_from_string(require_string(c, "type"))});
  return out;
}

Json optional_duration(const std::optional<Duration>& d) { return d ? Json(*d) : Json(nullptr); }

std::optional<Duration> optional_duration_from(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) raise(ErrorKind::InvalidSpec, std::string("'") + field + "' must be an integer or null");
  return it->get<Duration>();
}

std::string optional_string(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) raise(ErrorKind::InvalidSpec, std::string("'") + field + "' must be a string");
  return it->get<std::string>();
}

void check_asset_name(const std::string& name, int version) {
  if (!is_valid_asset_name(name)) raise(ErrorKind::InvalidSpec, "invalid asset name '" + name + "'");
  if (version < 1) raise(ErrorKind::InvalidSpec, "version of '" + name + "' must be a positive integer");
}

void check_column_name(const std::string& name) {
  if (!is_valid_column_name(name)) raise(ErrorKind::InvalidSpec, "invalid column name '" + name + "'");
}

void check_dsl_lookback(const FeatureSetSpec& spec, const dsl::DslProgram& program) {
  // emission and implicit latest look back over the widest window, or one interval without aggregations
  Duration needed = program.aggregations.empty() ? spec.materialization.schedule_interval : program.max_window();
  if (spec.source.source_lookback < needed) {
    raise(ErrorKind::InvalidSpec, "source_lookback " + std::to_string(spec.source.source_lookback) +
                                      " is shorter than the program's lookback " + std::to_string(needed));
  }
}

void validate_policy(const MaterializationPolicy& p) {
  if (p.schedule_interval <= 0) raise(ErrorKind::InvalidSpec, "schedule_interval must be positive");
  if (p.ttl && *p.ttl <= 0) raise(ErrorKind::InvalidSpec, "ttl must be positive when set");
  if (p.materialization_delay < 0) raise(ErrorKind::InvalidSpec, "materialization_delay must be non-negative");
}

}  // namespace

Json to_json(const EntityDef& e) {
  Json j = Json::object();
  j["name"] = e.name;
  j["version"] = e.version;
  j["index_columns"] = columns_to_json(e.index_columns);
  j["description"] = e.description;
  return j;
}

EntityDef entity_from_json(const Json& j) {
  EntityDef e;
  e.name = require_string(j, "name");
  e.version = static_cast<int>(require_int(j, "version"));
  e.index_columns = columns_from_json(j, "index_columns");
  e.description = optional_string(j, "description");
  return e;
}

Json to_json(const MaterializationPolicy& p) {
  Json j = Json::object();
  j["offline_enabled"] = p.offline_enabled;
  j["online_enabled"] = p.online_enabled;
  j["schedule_interval"] = p.schedule_interval;
  j["ttl"] = optional_duration(p.ttl);
  j["materialization_delay"] = p.materialization_delay;
  return j;
}

MaterializationPolicy policy_from_json(const Json& j) {
  MaterializationPolicy p;
  p.offline_enabled = require_bool(j, "offline_enabled");
  p.online_enabled = require_bool(j, "online_enabled");
  p.schedule_interval = require_int(j, "schedule_interval");
  p.ttl = optional_duration_from(j, "ttl");
  p.materialization_delay = j.contains("materialization_delay") ? require_int(j, "materialization_delay") : 0;
  return p;
}

Json to_json(const FeatureSetSpec& s) {
  Json j = Json::object();
  j["name"] = s.name;
  j["version"] = s.version;
  Json ents = Json::array();
  for (const auto& e : s.entities) ents.push_back(Json{{"name", e.name}, {"version", e.version}});
  j["entities"] = ents;
  j["source"] = Json{{"path", s.source.path},
                     {"timestamp_column", s.source.timestamp_column},
                     {"source_lookback", s.source.source_lookback},
                     {"source_delay", s.source.source_delay}};
  Json t = Json::object();
  if (s.transformation.kind == TransformKind::Dsl) {
    t["kind"] = "dsl";
    t["dsl_program"] = s.transformation.dsl_program;
  } else {
    t["kind"] = "opaque";
    t["opaque_id"] = s.transformation.opaque_id;
  }
  j["transformation"] = t;
  j["features"] = columns_to_json(s.features);
  j["timestamp_column"] = s.timestamp_column;
  j["materialization"] = to_json(s.materialization);
  j["description"] = s.description;
  return j;
}

FeatureSetSpec feature_set_from_json(const Json& j) {
  FeatureSetSpec s;
  s.name = require_string(j, "name");
  s.version = static_cast<int>(require_int(j, "version"));
  const Json& ents = require_field(j, "entities");
  if (!ents.is_array()) raise(ErrorKind::InvalidSpec, "'entities' must be an array");
  for (const auto& e : ents) s.entities.push_back({require_string(e, "name"), static_cast<int>(require_int(e, "version"))});
  const Json& src = require_field(j, "source");
  s.source.path = require_string(src, "path");
  s.source.timestamp_column = require_string(src, "timestamp_column");
  s.source.source_lookback = src.contains("source_lookback") ? require_int(src, "source_lookback") : 0;
  s.source.source_delay = src.contains("source_delay") ? require_int(src, "source_delay") : 0;
  const Json& t = require_field(j, "transformation");
  std::string kind = require_string(t, "kind");
  if (kind == "dsl") {
    s.transformation.kind = TransformKind::Dsl;
  } else if (kind == "opaque") {
    s.transformation.kind = TransformKind::Opaque;
  } else {
    raise(ErrorKind::InvalidSpec, "transformation kind must be 'dsl' or 'opaque'");
  }
  s.transformation.dsl_program = optional_string(t, "dsl_program");
  s.transformation.opaque_id = optional_string(t, "opaque_id");
  s.features = columns_from_json(j, "features");
  s.timestamp_column = require_string(j, "timestamp_column");
  s.materialization = policy_from_json(require_field(j, "materialization"));
  s.description = optional_string(j, "description");
  return s;
}

FeatureSetPatch FeatureSetPatch::from_json(const Json& j) {
  static const std::set<std::string> kImmutable = {"name",     "version",          "entities", "source",
                                                   "features", "timestamp_column", "transformation"};
  if (!j.is_object()) raise(ErrorKind::InvalidSpec, "patch must be a JSON object");
  FeatureSetPatch patch;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (kImmutable.count(key)) {
      raise(ErrorKind::ImmutableFieldChange, "'" + key + "' is immutable; register a new version instead");
    }
    if (key == "description") {
      if (!it->is_string()) raise(ErrorKind::InvalidSpec, "'description' must be a string");
      patch.description = it->get<std::string>();
    } else if (key == "materialization") {
      if (!it->is_object()) raise(ErrorKind::InvalidSpec, "'materialization' must be an object");
      Policy p;
      const Json& m = *it;
      for (auto f = m.begin(); f != m.end(); ++f) {
        const std::string& k = f.key();
        if (k == "offline_enabled") {
          p.offline_enabled = require_bool(m, "offline_enabled");
        } else if (k == "online_enabled") {
          p.online_enabled = require_bool(m, "online_enabled");
        } else if (k == "schedule_interval") {
          p.schedule_interval = require_int(m, "schedule_interval");
        } else if (k == "ttl") {
          p.ttl = optional_duration_from(m, "ttl");
        } else if (k == "materialization_delay") {
          p.materialization_delay = require_int(m, "materialization_delay");
        } else {
          raise(ErrorKind::InvalidSpec, "unknown materialization field '" + k + "'");
        }
      }
      patch.materialization = p;
    } else {
      raise(ErrorKind::InvalidSpec, "unknown feature set field '" + key + "'");
    }
  }
  return patch;
}

Registry::Registry(std::optional<fsys::path> root) : root_(std::move(root)) {
  if (root_) load();
}

void Registry::load() {
  auto scan = [&](const char* kind, auto&& consume) {
    fsys::path dir = *root_ / "registry" / kind;
    if (!fsys::exists(dir)) return;
    for (const auto& name_dir : fsys::directory_iterator(dir)) {
      if (!name_dir.is_directory()) continue;
      for (const auto& doc : fsys::directory_iterator(name_dir.path())) {
        if (!doc.is_regular_file() || doc.path().filename().string().find(".tmp-") != std::string::npos) continue;
        consume(Json::parse(read_file(doc.path())));
      }
    }
  };
  scan(kEntityKind, [&](const Json& j) {
    EntityDef e = entity_from_json(j);
    entities_[e.ref()] = std::move(e);
  });
  scan(kFeatureSetKind, [&](const Json& j) {
    FeatureSetSpec s = feature_set_from_json(j);
    feature_sets_[s.ref()] = std::move(s);
  });
}

void Registry::persist(const std::string& kind, const std::string& name, int version, const Json& doc) const {
  if (!root_) return;
  atomic_write_file(*root_ / "registry" / kind / name / std::to_string(version), doc.dump(2) + "\n");
}

EntityDef Registry::register_entity(const EntityDef& def) {
  check_asset_name(def.name, def.version);
  std::unique_lock lock(mu_);
  if (entities_.count(def.ref())) {
    raise(ErrorKind::DuplicateVersion, "entity " + to_string(def.ref()) + " already exists");
  }
  if (def.index_columns.empty()) raise(ErrorKind::InvalidSpec, "entity '" + def.name + "' has no index columns");
  std::set<std::string> seen;
  for (const auto& c : def.index_columns) {
    check_column_name(c.name);
    if (c.type == ScalarType::Float64) raise(ErrorKind::InvalidSpec, "index column '" + c.name + "' must be string or int64");
    if (!seen.insert(c.name).second) raise(ErrorKind::InvalidSpec, "duplicate index column '" + c.name + "'");
  }
  persist(kEntityKind, def.name, def.version, to_json(def));
  entities_[def.ref()] = def;
  return def;
}

EntityDef Registry::get_entity(const std::string& name, int version) const {
  std::shared_lock lock(mu_);
  auto it = entities_.find({name, version});
  if (it == entities_.end()) raise(ErrorKind::NotFound, "entity " + name + ":" + std::to_string(version) + " not found");
  return it->second;
}

std::vector<EntityDef> Registry::list_entities() const {
  std::shared_lock lock(mu_);
  std::vector<EntityDef> out;
  for (const auto& [ref, e] : entities_) out.push_back(e);
  return out;
}

std::vector<Column> Registry::index_columns(const FeatureSetSpec& spec) const {
  std::shared_lock lock(mu_);
  std::vector<Column> out;
  for (const auto& ref : spec.entities) {
    auto it = entities_.find(ref);
    if (it == entities_.end()) raise(ErrorKind::UnknownEntity, "entity " + to_string(ref) + " is not registered");
    out.insert(out.end(), it->second.index_columns.begin(), it->second.index_columns.end());
  }
  return out;
}

FeatureSetSpec Registry::register_feature_set(const FeatureSetSpec& spec) {
  check_asset_name(spec.name, spec.version);
  {
    std::shared_lock lock(mu_);
    if (feature_sets_.count(spec.ref())) {
      raise(ErrorKind::DuplicateVersion, "feature set " + to_string(spec.ref()) + " already exists");
    }
  }
  if (spec.entities.empty()) raise(ErrorKind::InvalidSpec, "feature set '" + spec.name + "' references no entities");
  std::vector<Column> index = index_columns(spec);

  std::set<std::string> index_names;
  for (const auto& c : index) {
    if (!index_names.insert(c.name).second) {
      raise(ErrorKind::SchemaConflict, "index column '" + c.name + "' is contributed by more than one entity");
    }
  }
  check_column_name(spec.timestamp_column);
  if (index_names.count(spec.timestamp_column)) {
    raise(ErrorKind::SchemaConflict, "timestamp column '" + spec.timestamp_column + "' collides with an index column");
  }
  if (spec.features.empty()) raise(ErrorKind::InvalidSpec, "feature set '" + spec.name + "' declares no features");
  std::set<std::string> feature_names;
  for (const auto& f : spec.features) {
    check_column_name(f.name);
    if (index_names.count(f.name) || f.name == spec.timestamp_column) {
      raise(ErrorKind::SchemaConflict, "feature '" + f.name + "' collides with an index or timestamp column");
    }
    if (!feature_names.insert(f.name).second) raise(ErrorKind::SchemaConflict, "duplicate feature '" + f.name + "'");
  }

  if (spec.source.path.empty()) raise(ErrorKind::InvalidSpec, "source path is empty");
  check_column_name(spec.source.timestamp_column);
  if (spec.source.source_lookback < 0 || spec.source.source_delay < 0) {
    raise(ErrorKind::InvalidSpec, "source_lookback and source_delay must be non-negative");
  }
  validate_policy(spec.materialization);

  const TransformDef& t = spec.transformation;
  if (t.kind == TransformKind::Dsl) {
    if (t.dsl_program.empty() || !t.opaque_id.empty()) {
      raise(ErrorKind::InvalidSpec, "a dsl transformation sets dsl_program and not opaque_id");
    }
    dsl::DslProgram program = dsl::parse(t.dsl_program);
    auto outputs = program.output_names();
    if (std::set<std::string>(outputs.begin(), outputs.end()) != feature_names) {
      raise(ErrorKind::SchemaConflict, "DSL outputs do not match the declared features");
    }
    check_dsl_lookback(spec, program);
  } else if (t.opaque_id.empty() || !t.dsl_program.empty()) {
    raise(ErrorKind::InvalidSpec, "an opaque transformation sets opaque_id and not dsl_program");
  }

  std::unique_lock lock(mu_);
  if (feature_sets_.count(spec.ref())) {
    raise(ErrorKind::DuplicateVersion, "feature set " + to_string(spec.ref()) + " already exists");
  }
  persist(kFeatureSetKind, spec.name, spec.version, to_json(spec));
  feature_sets_[spec.ref()] = spec;
  return spec;
}

FeatureSetSpec Registry::update_feature_set(const std::string& name, int version, const FeatureSetPatch& patch) {
  std::unique_lock lock(mu_);
  auto it = feature_sets_.find({name, version});
  if (it == feature_sets_.end()) raise(ErrorKind::NotFound, "feature set " + name + ":" + std::to_string(version) + " not found");
  FeatureSetSpec updated = it->second;
  if (patch.description) updated.description = *patch.description;
  if (patch.materialization) {
    const auto& p = *patch.materialization;
    auto& m = updated.materialization;
    if (p.offline_enabled) m.offline_enabled = *p.offline_enabled;
    if (p.online_enabled) m.online_enabled = *p.online_enabled;
    if (p.schedule_interval) m.schedule_interval = *p.schedule_interval;
    if (p.ttl) m.ttl = *p.ttl;
    if (p.materialization_delay) m.materialization_delay = *p.materialization_delay;
  }
  validate_policy(updated.materialization);
  if (updated.transformation.kind == TransformKind::Dsl) check_dsl_lookback(updated, dsl::parse(updated.transformation.dsl_program));
  persist(kFeatureSetKind, name, version, to_json(updated));
  it->second = updated;
  return updated;
}

FeatureSetSpec Registry::get_feature_set(const std::string& name, int version) const {
  std::shared_lock lock(mu_);
  auto it = feature_sets_.find({name, version});
  if (it == feature_sets_.end()) raise(ErrorKind::NotFound, "feature set " + name + ":" + std::to_string(version) + " not found");
  return it->second;
}

std::vector<FeatureSetSpec> Registry::list_feature_sets(std::string_view name_prefix) const {
  std::shared_lock lock(mu_);
  std::vector<FeatureSetSpec> out;
  for (const auto& [ref, s] : feature_sets_) {
    if (ref.name.compare(0, name_prefix.size(), name_prefix) == 0) out.push_back(s);
  }
  return out;
}

}  // namespace fstore
