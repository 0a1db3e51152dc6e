#pragma once

#include <filesystem>
#include <optional>

#include "fstore/clock.hpp"
#include "fstore/compute.hpp"
#include "fstore/consistency.hpp"
#include "fstore/offline_store.hpp"
#include "fstore/online_store.hpp"
#include "fstore/registry.hpp"
#include "fstore/retrieval.hpp"
#include "fstore/scheduler.hpp"

namespace fstore {

/// Every component of one feature store, wired together. With a root directory all state lives
/// below it (registry/, offline/, online/, jobs/); without one everything stays in memory.
class FeatureStore {
 public:
  static constexpr const char* kMarkerFile = "featurestore.json";

  /// Creates (or re-opens) a store root by writing its marker file.
  static void init(const std::filesystem::path& root);
  static bool is_root(const std::filesystem::path& root);

  /// Throws NotFound when `root` was never initialized.
  FeatureStore(std::optional<std::filesystem::path> root, const Clock& clock, SchedulerOptions options = {});

  FeatureStore(const FeatureStore&) = delete;
  FeatureStore& operator=(const FeatureStore&) = delete;

  Registry& registry() { return registry_; }
  TransformRegistry& transforms() { return transforms_; }
  OfflineStore& offline() { return offline_; }
  OnlineStore& online() { return online_; }
  const FeatureCalculator& calculator() const { return calculator_; }
  Scheduler& scheduler() { return scheduler_; }
  const Retriever& retriever() const { return retriever_; }

  /// Uses the feature set's current TTL.
  ConsistencyReport check_consistency(const FeatureSetRef& fsv, Timestamp now) const;

 private:
  static std::optional<std::filesystem::path> checked(std::optional<std::filesystem::path> root);

  std::optional<std::filesystem::path> root_;
  Registry registry_;
  TransformRegistry transforms_;
  OfflineStore offline_;
  OnlineStore online_;
  FeatureCalculator calculator_;
  Scheduler scheduler_;
  Retriever retriever_;
};

}  // namespace fstore
