#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fstore/frame.hpp"
#include "fstore/record.hpp"
#include "fstore/registry.hpp"

namespace fstore {

struct TransformContext {
  FeatureSetRef feature_set;
  FeatureWindow feature_window;
  FeatureWindow source_window;
  std::string job_id;
};

/// An in-process transform: (source frame, context) -> feature frame. Its output must carry the
/// index columns, the feature set's timestamp column and every declared feature.
using TransformHook = std::function<Frame(const Frame& source, const TransformContext& context)>;

class TransformRegistry {
 public:
  void register_hook(const std::string& id, TransformHook hook);
  /// Throws UnknownTransformHook.
  TransformHook get(const std::string& id) const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, TransformHook> hooks_;
};

/// [w.start - lookback, w.end), with the start clamped at 0.
FeatureWindow derive_source_window(FeatureWindow w, Duration source_lookback);

/// Reads every *.jsonl / *.json file of the source directory (in file-name order) and keeps rows
/// with timestamp in [window.start, window.end). Column types are inferred over the whole source
/// so the schema does not depend on the window. Throws SourceUnavailable, SourceSchemaMismatch.
Frame read_source(const SourceDef& source, FeatureWindow window, const std::filesystem::path& base_dir);

/// Validates a transform output against the feature set contract and wraps each row as a
/// FeatureRecord stamped with creation_ts = now. Int64 values widen into float64 features.
std::vector<FeatureRecord> frame_to_records(const Frame& output, const std::vector<Column>& index_columns,
                                            const FeatureSetSpec& spec, Timestamp now);

class FeatureCalculator {
 public:
  FeatureCalculator(const Registry& registry, const TransformRegistry& transforms,
                    std::filesystem::path base_dir);

  /// Derive the source window, read it, transform, keep rows inside `window` and wrap them as
  /// records created at `now`.
  std::vector<FeatureRecord> calculate(const FeatureSetSpec& spec, FeatureWindow window, Timestamp now,
                                       const std::string& job_id = {}) const;

 private:
  const Registry& registry_;
  const TransformRegistry& transforms_;
  std::filesystem::path base_dir_;
};

}  // namespace fstore
