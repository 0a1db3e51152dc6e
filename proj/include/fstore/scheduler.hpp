#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fstore/clock.hpp"
#include "fstore/compute.hpp"
#include "fstore/consistency.hpp"
#include "fstore/interval_set.hpp"
#include "fstore/offline_store.hpp"
#include "fstore/online_store.hpp"
#include "fstore/registry.hpp"

namespace fstore {

enum class JobKind { Backfill, Scheduled };
enum class JobState { Queued, Running, Succeeded, Failed, Canceled };
enum class Sink { Offline, Online };
enum class SinkStatus { Pending, Merged, Failed };

std::string_view to_string(JobKind k);
std::string_view to_string(JobState s);
std::string_view to_string(Sink s);
std::string_view to_string(SinkStatus s);

struct MaterializationJob {
  std::string job_id;
  FeatureSetRef fsv;
  FeatureWindow window;
  JobKind kind = JobKind::Backfill;
  JobState state = JobState::Queued;
  bool suspended = false;                  // queued scheduled job yielding to a backfill
  std::map<Sink, SinkStatus> sink_status;  // one entry per sink enabled at creation
  int attempt = 0;
  Timestamp created_at = 0;
  std::optional<Timestamp> finished_at;
  MaterializationPolicy policy;            // snapshot taken at creation
  std::optional<Timestamp> staged_at;      // creation_ts of the staged record set
  size_t staged_records = 0;
  std::string last_error;

  bool active() const { return state == JobState::Queued || state == JobState::Running; }
  friend bool operator==(const MaterializationJob&, const MaterializationJob&) = default;
};

Json to_json(const MaterializationJob& job);
MaterializationJob job_from_json(const Json& j);

struct JobTransition {
  std::string job_id;
  std::optional<JobState> from;  // nullopt: job created
  JobState to;
};

struct JobResult {
  MaterializationJob job;
  std::optional<OfflineMergeReport> offline;
  std::optional<OnlineMergeReport> online;
};

/// Invoked before each sink merge. Throwing fstore::Error fails that sink; any other exception
/// escapes the scheduler untouched, which is how tests simulate a process crash.
using SinkMergeHook = std::function<void(const MaterializationJob& job, Sink sink)>;

struct SchedulerOptions {
  int max_attempts = 5;
  bool run_on_tick = true;     // tick() executes the jobs it starts
  bool retry_on_tick = false;  // tick() retries failed jobs with attempts left
  size_t max_running_jobs = 0;  // tick() starts no job beyond this many running; 0 is unlimited
};

/// Issues and runs materialization jobs. All state transitions go through one mutex; feature
/// calculation and sink merges run outside it so disjoint jobs may execute in parallel.
/// Jobs persist under <root>/jobs/<job_id>/ as state.json plus staged.jsonl, the record set
/// computed by the first successful calculation and reused verbatim by every retry.
class Scheduler {
 public:
  Scheduler(const Registry& registry, const FeatureCalculator& calculator, OfflineStore& offline,
            OnlineStore& online, const Clock& clock, std::optional<std::filesystem::path> root = std::nullopt,
            SchedulerOptions options = {});

  /// Queues a user backfill. Queued scheduled jobs overlapping it are suspended until it finishes.
  std::string request_backfill(const FeatureSetRef& fsv, FeatureWindow window);

  /// Creates at most one scheduled job per feature set (oldest unmaterialized tile whose end is
  /// <= now - materialization_delay), then starts every runnable queued job, backfills first.
  std::vector<JobTransition> tick(Timestamp now);

  /// Runs a running job, or starts and runs a runnable queued one, at clock.now().
  JobResult run_job(const std::string& job_id);
  JobResult run_job(const std::string& job_id, Timestamp now);
  JobResult retry(const std::string& job_id);
  JobResult retry(const std::string& job_id, Timestamp now);
  void cancel(const std::string& job_id);

  MaterializationJob job_status(const std::string& job_id) const;
  std::vector<MaterializationJob> jobs(const std::optional<FeatureSetRef>& fsv = std::nullopt) const;
  IntervalSet data_state(const FeatureSetRef& fsv) const;

  /// Scheduled windows tile the timeline at origin + k * schedule_interval. Defaults to 0.
  void set_schedule_origin(const FeatureSetRef& fsv, Timestamp origin);

  /// Runs a bootstrap while no job of the feature set is running; no job can start meanwhile.
  BootstrapReport bootstrap(const FeatureSetRef& fsv, BootstrapDirection direction);

  void set_sink_merge_hook(SinkMergeHook hook);

  /// Empty when every running-job window is disjoint per feature set and each succeeded job's
  /// window is covered by the data state.
  std::vector<std::string> invariant_violations() const;

 private:
  MaterializationJob& job_ref(const std::string& id);
  std::string next_job_id();
  void persist_state(const MaterializationJob& job) const;
  void persist_origins() const;
  void load();
  bool overlaps_running(const MaterializationJob& job) const;
  bool reserves_window(const MaterializationJob& job) const;
  std::optional<FeatureWindow> next_tile(const FeatureSetSpec& spec, Timestamp now) const;
  void start_locked(MaterializationJob& job, std::vector<JobTransition>* transitions);
  void finish_locked(MaterializationJob& job, Timestamp now);
  void resume_after_backfill_locked(const MaterializationJob& backfill);
  JobResult execute(const std::string& id, Timestamp now);
  std::vector<FeatureRecord> staged_records(const MaterializationJob& job);

  const Registry& registry_;
  const FeatureCalculator& calculator_;
  OfflineStore& offline_;
  OnlineStore& online_;
  const Clock& clock_;
  std::optional<std::filesystem::path> root_;
  SchedulerOptions options_;

  mutable std::mutex mu_;
  std::map<std::string, MaterializationJob> jobs_;
  std::map<std::string, std::vector<FeatureRecord>> staged_;
  std::map<FeatureSetRef, IntervalSet> data_state_;
  std::map<FeatureSetRef, Timestamp> origins_;
  std::uint64_t next_id_ = 1;
  SinkMergeHook hook_;
};

}  // namespace fstore
