#include "fstore/compute.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include "fstore/codec.hpp"
#include "fstore/dsl.hpp"
#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

void TransformRegistry::register_hook(const std::string& id, TransformHook hook) {
  std::unique_lock lock(mu_);
  hooks_[id] = std::move(hook);
}

TransformHook TransformRegistry::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = hooks_.find(id);
  if (it == hooks_.end()) raise(ErrorKind::UnknownTransformHook, "no transform hook registered as '" + id + "'");
  return it->second;
}

FeatureWindow derive_source_window(FeatureWindow w, Duration source_lookback) {
  return FeatureWindow{std::max<Timestamp>(0, w.start_ts - source_lookback), w.end_ts};
}

Frame read_source(const SourceDef& source, FeatureWindow window, const fsys::path& base_dir) {
  fsys::path dir = source.path;
  if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
  std::error_code ec;
  if (!fsys::is_directory(dir, ec)) raise(ErrorKind::SourceUnavailable, "source directory " + dir.string() + " not found");

  std::vector<fsys::path> files;
  for (const auto& entry : fsys::directory_iterator(dir, ec)) {
    auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".jsonl" || ext == ".json")) files.push_back(entry.path());
  }
  if (ec) raise(ErrorKind::SourceUnavailable, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<Json> objects;
  for (const auto& f : files) {
    std::string text;
    try {
      text = read_file(f);
    } catch (const Error& e) {
      raise(ErrorKind::SourceUnavailable, e.what());
    }
    std::vector<Json> lines;
    try {
      lines = parse_jsonl(text, f.string());
    } catch (const Error& e) {
      raise(ErrorKind::SourceSchemaMismatch, e.what());
    }
    for (auto& j : lines) {
      if (!j.is_object()) raise(ErrorKind::SourceSchemaMismatch, f.string() + ": every line must be a JSON object");
      objects.push_back(std::move(j));
    }
  }

  // infer column types in first-appearance order; ints widen to float when both appear
  Frame frame;
  std::map<std::string, size_t> index;
  std::vector<bool> typed;
  auto column_for = [&](const std::string& name) -> size_t {
    auto [it, inserted] = index.try_emplace(name, frame.schema.size());
    if (inserted) {
      frame.schema.push_back({name, ScalarType::String});
      typed.push_back(false);
    }
    return it->second;
  };
  column_for(source.timestamp_column);
  for (const auto& obj : objects) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      size_t c = column_for(it.key());
      if (it->is_null()) continue;
      ScalarType t;
      if (it->is_number_integer()) {
        t = ScalarType::Int64;
      } else if (it->is_number_float()) {
        t = ScalarType::Float64;
      } else if (it->is_string()) {
        t = ScalarType::String;
      } else {
        raise(ErrorKind::SourceSchemaMismatch, "column '" + it.key() + "' holds a non-scalar value");
      }
      if (!typed[c]) {
        frame.schema[c].type = t;
        typed[c] = true;
      } else if (frame.schema[c].type != t) {
        bool numeric_mix = t != ScalarType::String && frame.schema[c].type != ScalarType::String;
        if (!numeric_mix) raise(ErrorKind::SourceSchemaMismatch, "column '" + it.key() + "' mixes strings and numbers");
        frame.schema[c].type = ScalarType::Float64;
      }
    }
  }
  frame.schema[0].type = ScalarType::Int64;

  for (const auto& obj : objects) {
    auto ts_it = obj.find(source.timestamp_column);
    if (ts_it == obj.end() || !ts_it->is_number_integer()) {
      raise(ErrorKind::SourceSchemaMismatch, "row without integer '" + source.timestamp_column + "': " + obj.dump());
    }
    Timestamp ts = ts_it->get<Timestamp>();
    if (!window.contains(ts)) continue;
    Row row(frame.schema.size());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      size_t c = index.at(it.key());
      Scalar v = scalar_from_json(*it);
      if (frame.schema[c].type == ScalarType::Float64) {
        if (auto* i = std::get_if<std::int64_t>(&v)) v = static_cast<double>(*i);
      }
      row[c] = std::move(v);
    }
    frame.rows.push_back(std::move(row));
  }
  return frame;
}

std::vector<FeatureRecord> frame_to_records(const Frame& output, const std::vector<Column>& index_columns,
                                            const FeatureSetSpec& spec, Timestamp now) {
  try {
    output.check_well_formed();
  } catch (const Error& e) {
    raise(ErrorKind::TransformOutputSchemaError, e.what());
  }
  auto locate = [&](const std::string& name) {
    auto idx = output.column_index(name);
    if (!idx) raise(ErrorKind::TransformOutputSchemaError, "transform output lacks column '" + name + "'");
    return *idx;
  };

  std::vector<size_t> id_cols;
  for (const auto& ic : index_columns) {
    size_t i = locate(ic.name);
    if (output.schema[i].type != ic.type) {
      raise(ErrorKind::TransformOutputSchemaError, "index column '" + ic.name + "' has type " +
                                                       std::string(to_string(output.schema[i].type)));
    }
    id_cols.push_back(i);
  }
  size_t ts_col = locate(spec.timestamp_column);
  if (output.schema[ts_col].type != ScalarType::Int64) {
    raise(ErrorKind::TransformOutputSchemaError, "timestamp column '" + spec.timestamp_column + "' must be int64");
  }
  std::vector<size_t> feature_cols;
  for (const auto& f : spec.features) {
    size_t i = locate(f.name);
    ScalarType actual = output.schema[i].type;
    bool widening = f.type == ScalarType::Float64 && actual == ScalarType::Int64;
    if (actual != f.type && !widening) {
      raise(ErrorKind::TransformOutputSchemaError, "feature '" + f.name + "' is " + std::string(to_string(actual)) +
                                                       ", declared " + std::string(to_string(f.type)));
    }
    feature_cols.push_back(i);
  }

  std::vector<FeatureRecord> records;
  records.reserve(output.rows.size());
  for (const Row& row : output.rows) {
    if (is_null(row[ts_col])) raise(ErrorKind::TransformOutputSchemaError, "row with null timestamp");
    FeatureRecord r;
    for (size_t k = 0; k < id_cols.size(); ++k) r.ids.emplace_back(index_columns[k].name, row[id_cols[k]]);
    r.event_ts = std::get<std::int64_t>(row[ts_col]);
    r.creation_ts = now;
    for (size_t k = 0; k < feature_cols.size(); ++k) {
      Scalar v = row[feature_cols[k]];
      if (spec.features[k].type == ScalarType::Float64) {
        if (auto* i = std::get_if<std::int64_t>(&v)) v = static_cast<double>(*i);
      }
      r.features.emplace_back(spec.features[k].name, std::move(v));
    }
    validate_record(r);
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(), record_key_less);
  for (size_t i = 1; i < records.size(); ++i) {
    if (same_record_key(records[i - 1], records[i])) {
      raise(ErrorKind::TransformOutputSchemaError,
            "transform output repeats (ids, timestamp) at " + std::to_string(records[i].event_ts));
    }
  }
  return records;
}

FeatureCalculator::FeatureCalculator(const Registry& registry, const TransformRegistry& transforms,
                                     fsys::path base_dir)
    : registry_(registry), transforms_(transforms), base_dir_(std::move(base_dir)) {}

std::vector<FeatureRecord> FeatureCalculator::calculate(const FeatureSetSpec& spec, FeatureWindow window,
                                                        Timestamp now, const std::string& job_id) const {
  if (!window.valid()) raise(ErrorKind::InvalidArgument, "invalid feature window " + to_string(window));
  std::vector<Column> index = registry_.index_columns(spec);
  FeatureWindow source_window = derive_source_window(window, spec.source.source_lookback);
  Frame source = read_source(spec.source, source_window, base_dir_);

  Frame output;
  if (spec.transformation.kind == TransformKind::Dsl) {
    if (source.rows.empty()) return {};
    dsl::DslProgram program = dsl::parse(spec.transformation.dsl_program);
    dsl::BindOptions opts{source.schema, index, spec.source.timestamp_column, spec.timestamp_column,
                          spec.materialization.schedule_interval};
    output = dsl::execute(dsl::bind(program, opts), source, window);
  } else {
    TransformHook hook = transforms_.get(spec.transformation.opaque_id);
    output = hook(source, TransformContext{spec.ref(), window, source_window, job_id});
  }

  // keep only rows inside the feature window
  if (auto ts = output.column_index(spec.timestamp_column)) {
    std::erase_if(output.rows, [&](const Row& row) {
      if (row.size() <= *ts) return false;  // left for frame_to_records to reject
      auto* v = std::get_if<std::int64_t>(&row[*ts]);
      return v && !window.contains(*v);
    });
  }
  return frame_to_records(output, index, spec, now);
}

}  // namespace fstore
