#include "fstore/scheduler.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

std::string_view to_string(JobKind k) { return k == JobKind::Backfill ? "backfill" : "scheduled"; }

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Succeeded: return "succeeded";
    case JobState::Failed: return "failed";
    case JobState::Canceled: return "canceled";
  }
  return "?";
}

std::string_view to_string(Sink s) { return s == Sink::Offline ? "offline" : "online"; }

std::string_view to_string(SinkStatus s) {
  switch (s) {
    case SinkStatus::Pending: return "pending";
    case SinkStatus::Merged: return "merged";
    case SinkStatus::Failed: return "failed";
  }
  return "?";
}

namespace {

template <typename E, size_t N>
E enum_from(std::string_view text, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  raise(ErrorKind::InvalidSpec, std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr JobKind kKinds[] = {JobKind::Backfill, JobKind::Scheduled};
constexpr JobState kStates[] = {JobState::Queued, JobState::Running, JobState::Succeeded, JobState::Failed,
                                JobState::Canceled};
constexpr Sink kSinks[] = {Sink::Offline, Sink::Online};
constexpr SinkStatus kSinkStatuses[] = {SinkStatus::Pending, SinkStatus::Merged, SinkStatus::Failed};

Json optional_ts(const std::optional<Timestamp>& ts) { return ts ? Json(*ts) : Json(nullptr); }

std::optional<Timestamp> optional_ts_from(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<Timestamp>();
}

}  // namespace

Json to_json(const MaterializationJob& job) {
  Json j = Json::object();
  j["job_id"] = job.job_id;
  j["feature_set"] = Json{{"name", job.fsv.name}, {"version", job.fsv.version}};
  j["window"] = window_to_json(job.window);
  j["kind"] = to_string(job.kind);
  j["state"] = to_string(job.state);
  j["suspended"] = job.suspended;
  Json sinks = Json::object();
  for (const auto& [sink, status] : job.sink_status) sinks[std::string(to_string(sink))] = to_string(status);
  j["sink_status"] = sinks;
  j["attempt"] = job.attempt;
  j["created_at"] = job.created_at;
  j["finished_at"] = optional_ts(job.finished_at);
  j["policy"] = to_json(job.policy);
  j["staged_at"] = optional_ts(job.staged_at);
  j["staged_records"] = job.staged_records;
  j["last_error"] = job.last_error;
  return j;
}

MaterializationJob job_from_json(const Json& j) {
  MaterializationJob job;
  job.job_id = require_string(j, "job_id");
  const Json& fs = require_field(j, "feature_set");
  job.fsv = {require_string(fs, "name"), static_cast<int>(require_int(fs, "version"))};
  job.window = window_from_json(require_field(j, "window"));
  job.kind = enum_from(require_string(j, "kind"), kKinds, "job kind");
  job.state = enum_from(require_string(j, "state"), kStates, "job state");
  job.suspended = require_bool(j, "suspended");
  const Json& sinks = require_field(j, "sink_status");
  for (auto it = sinks.begin(); it != sinks.end(); ++it) {
    job.sink_status[enum_from(it.key(), kSinks, "sink")] = enum_from(it->get<std::string>(), kSinkStatuses, "sink status");
  }
  job.attempt = static_cast<int>(require_int(j, "attempt"));
  job.created_at = require_int(j, "created_at");
  job.finished_at = optional_ts_from(j, "finished_at");
  job.policy = policy_from_json(require_field(j, "policy"));
  job.staged_at = optional_ts_from(j, "staged_at");
  job.staged_records = static_cast<size_t>(require_int(j, "staged_records"));
  job.last_error = require_string(j, "last_error");
  return job;
}

Scheduler::Scheduler(const Registry& registry, const FeatureCalculator& calculator, OfflineStore& offline,
                     OnlineStore& online, const Clock& clock, std::optional<fsys::path> root, SchedulerOptions options)
    : registry_(registry),
      calculator_(calculator),
      offline_(offline),
      online_(online),
      clock_(clock),
      root_(std::move(root)),
      options_(options) {
  if (root_) load();
}

void Scheduler::load() {
  fsys::path dir = *root_ / "jobs";
  if (!fsys::exists(dir)) return;
  if (fsys::exists(dir / "origins.json")) {
    Json doc = Json::parse(read_file(dir / "origins.json"));
    for (const auto& o : doc) origins_[{require_string(o, "name"), static_cast<int>(require_int(o, "version"))}] = require_int(o, "origin");
  }
  for (const auto& entry : fsys::directory_iterator(dir)) {
    fsys::path state = entry.path() / "state.json";
    if (!entry.is_directory() || !fsys::exists(state)) continue;
    MaterializationJob job = job_from_json(Json::parse(read_file(state)));
    if (job.state == JobState::Running) {
      // the previous process died mid-run; whatever was staged survives for retry
      job.state = JobState::Failed;
      job.last_error = "interrupted before completion";
      persist_state(job);
    }
    if (job.state == JobState::Succeeded) data_state_[job.fsv].add(job.window);
    unsigned long long n = 0;
    if (std::sscanf(job.job_id.c_str(), "job-%llu", &n) == 1) next_id_ = std::max<std::uint64_t>(next_id_, n + 1);
    jobs_.emplace(job.job_id, std::move(job));
  }
}

void Scheduler::persist_state(const MaterializationJob& job) const {
  if (!root_) return;
  atomic_write_file(*root_ / "jobs" / job.job_id / "state.json", to_json(job).dump(2) + "\n");
}

void Scheduler::persist_origins() const {
  if (!root_) return;
  Json doc = Json::array();
  for (const auto& [fsv, origin] : origins_) doc.push_back(Json{{"name", fsv.name}, {"version", fsv.version}, {"origin", origin}});
  atomic_write_file(*root_ / "jobs" / "origins.json", doc.dump(2) + "\n");
}

std::string Scheduler::next_job_id() {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_id_++));
  return buf;
}

MaterializationJob& Scheduler::job_ref(const std::string& id) {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) raise(ErrorKind::NotFound, "job '" + id + "' not found");
  return it->second;
}

bool Scheduler::overlaps_running(const MaterializationJob& job) const {
  return std::any_of(jobs_.begin(), jobs_.end(), [&](const auto& kv) {
    const auto& other = kv.second;
    return other.job_id != job.job_id && other.fsv == job.fsv && other.state == JobState::Running &&
           other.window.overlaps(job.window);
  });
}

bool Scheduler::reserves_window(const MaterializationJob& job) const {
  return job.active() || (job.state == JobState::Failed && job.attempt < options_.max_attempts);
}

std::optional<FeatureWindow> Scheduler::next_tile(const FeatureSetSpec& spec, Timestamp now) const {
  const FeatureSetRef fsv = spec.ref();
  const Duration interval = spec.materialization.schedule_interval;
  const Timestamp limit = now - spec.materialization.materialization_delay;
  auto origin_it = origins_.find(fsv);
  const Timestamp origin = origin_it == origins_.end() ? 0 : origin_it->second;
  static const IntervalSet kEmpty;
  auto ds_it = data_state_.find(fsv);
  const IntervalSet& covered = ds_it == data_state_.end() ? kEmpty : ds_it->second;

  std::vector<FeatureWindow> reserved;
  for (const auto& [id, job] : jobs_) {
    if (job.fsv == fsv && reserves_window(job)) reserved.push_back(job.window);
  }

  for (Timestamp k = 0;;) {
    FeatureWindow tile{origin + k * interval, origin + (k + 1) * interval};
    if (tile.end_ts > limit) return std::nullopt;
    if (covered.covers(tile)) {
      Timestamp covered_end = tile.end_ts;
      for (const auto& iv : covered.intervals()) {
        if (iv.start_ts <= tile.start_ts && tile.end_ts <= iv.end_ts) covered_end = iv.end_ts;
      }
      k = std::max(k + 1, (covered_end - origin) / interval);
      continue;
    }
    bool clash = std::any_of(reserved.begin(), reserved.end(), [&](const FeatureWindow& w) { return w.overlaps(tile); });
    if (!clash) return tile;
    ++k;
  }
}

std::string Scheduler::request_backfill(const FeatureSetRef& fsv, FeatureWindow window) {
  FeatureSetSpec spec = registry_.get_feature_set(fsv);
  if (!window.valid()) raise(ErrorKind::InvalidArgument, "invalid backfill window " + to_string(window));
  if (!spec.materialization.any_sink()) {
    raise(ErrorKind::NoSinkEnabled, "feature set " + to_string(fsv) + " has no store enabled");
  }

  std::lock_guard lock(mu_);
  for (const auto& [id, other] : jobs_) {
    if (other.fsv == fsv && other.kind == JobKind::Backfill && other.active() && other.window.overlaps(window)) {
      raise(ErrorKind::OverlapWithRunningBackfill,
            "backfill " + to_string(window) + " overlaps " + id + " " + to_string(other.window));
    }
  }

  MaterializationJob job;
  job.job_id = next_job_id();
  job.fsv = fsv;
  job.window = window;
  job.kind = JobKind::Backfill;
  job.policy = spec.materialization;
  job.created_at = clock_.now();
  if (spec.materialization.offline_enabled) job.sink_status[Sink::Offline] = SinkStatus::Pending;
  if (spec.materialization.online_enabled) job.sink_status[Sink::Online] = SinkStatus::Pending;

  for (auto& [id, other] : jobs_) {
    if (other.fsv == fsv && other.kind == JobKind::Scheduled && other.state == JobState::Queued &&
        !other.suspended && other.window.overlaps(window)) {
      other.suspended = true;
      persist_state(other);
    }
  }
  persist_state(job);
  std::string id = job.job_id;
  jobs_.emplace(id, std::move(job));
  return id;
}

void Scheduler::start_locked(MaterializationJob& job, std::vector<JobTransition>* transitions) {
  job.state = JobState::Running;
  job.attempt += 1;
  persist_state(job);
  if (transitions) transitions->push_back({job.job_id, JobState::Queued, JobState::Running});
}

void Scheduler::resume_after_backfill_locked(const MaterializationJob& backfill) {
  if (backfill.kind != JobKind::Backfill) return;
  auto blocking = [&](const MaterializationJob& scheduled) {
    return std::any_of(jobs_.begin(), jobs_.end(), [&](const auto& kv) {
      const auto& b = kv.second;
      return b.kind == JobKind::Backfill && b.fsv == scheduled.fsv && reserves_window(b) &&
             b.window.overlaps(scheduled.window);
    });
  };
  for (auto& [id, job] : jobs_) {
    if (job.suspended && job.fsv == backfill.fsv && !blocking(job)) {
      job.suspended = false;
      persist_state(job);
    }
  }
}

void Scheduler::finish_locked(MaterializationJob& job, Timestamp now) {
  bool all_merged = std::all_of(job.sink_status.begin(), job.sink_status.end(),
                                [](const auto& kv) { return kv.second == SinkStatus::Merged; });
  job.state = all_merged ? JobState::Succeeded : JobState::Failed;
  job.finished_at = now;
  if (all_merged) {
    data_state_[job.fsv].add(job.window);
    job.last_error.clear();
  }
  persist_state(job);
  resume_after_backfill_locked(job);
}

std::vector<FeatureRecord> Scheduler::staged_records(const MaterializationJob& job) {
  {
    std::lock_guard lock(mu_);
    auto it = staged_.find(job.job_id);
    if (it != staged_.end()) return it->second;
  }
  if (!root_) raise(ErrorKind::InvalidState, "staged records of " + job.job_id + " are gone");
  fsys::path path = *root_ / "jobs" / job.job_id / "staged.jsonl";
  std::vector<FeatureRecord> records;
  for (const auto& line : parse_jsonl(read_file(path), path.string())) records.push_back(record_from_json(line));
  std::lock_guard lock(mu_);
  staged_[job.job_id] = records;
  return records;
}

JobResult Scheduler::execute(const std::string& id, Timestamp now) {
  MaterializationJob snapshot;
  {
    std::lock_guard lock(mu_);
    snapshot = job_ref(id);
  }
  if (snapshot.state != JobState::Running) raise(ErrorKind::InvalidState, id + " is not running");

  JobResult result;
  if (!snapshot.staged_at) {
    std::vector<FeatureRecord> records;
    try {
      FeatureSetSpec spec = registry_.get_feature_set(snapshot.fsv);
      spec.materialization = snapshot.policy;
      records = calculator_.calculate(spec, snapshot.window, now, id);
      if (root_) {
        std::vector<Json> lines;
        lines.reserve(records.size());
        for (const auto& r : records) lines.push_back(record_to_json(r));
        atomic_write_file(*root_ / "jobs" / id / "staged.jsonl", to_jsonl(lines));
      }
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      MaterializationJob& job = job_ref(id);
      job.state = JobState::Failed;
      job.finished_at = now;
      job.last_error = std::string(to_string(e.kind())) + ": " + e.what();
      persist_state(job);
      resume_after_backfill_locked(job);
      result.job = job;
      return result;
    }
    std::lock_guard lock(mu_);
    MaterializationJob& job = job_ref(id);
    job.staged_at = now;
    job.staged_records = records.size();
    staged_[id] = std::move(records);
    persist_state(job);
    snapshot = job;
  }

  const std::vector<FeatureRecord> records = staged_records(snapshot);
  for (Sink sink : kSinks) {
    auto it = snapshot.sink_status.find(sink);
    if (it == snapshot.sink_status.end() || it->second == SinkStatus::Merged) continue;
    try {
      if (hook_) hook_(snapshot, sink);
      if (sink == Sink::Offline) {
        result.offline = offline_.merge_offline(snapshot.fsv, records);
      } else {
        result.online = online_.merge_online(snapshot.fsv, records, snapshot.policy.ttl);
      }
      std::lock_guard lock(mu_);
      MaterializationJob& job = job_ref(id);
      job.sink_status[sink] = SinkStatus::Merged;
      persist_state(job);
      snapshot = job;
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      MaterializationJob& job = job_ref(id);
      job.sink_status[sink] = SinkStatus::Failed;
      job.last_error = std::string(to_string(sink)) + " merge: " + std::string(to_string(e.kind())) + ": " + e.what();
      persist_state(job);
      snapshot = job;
    }
  }

  std::lock_guard lock(mu_);
  MaterializationJob& job = job_ref(id);
  finish_locked(job, now);
  result.job = job;
  return result;
}

JobResult Scheduler::run_job(const std::string& job_id) { return run_job(job_id, clock_.now()); }

JobResult Scheduler::run_job(const std::string& job_id, Timestamp now) {
  {
    std::lock_guard lock(mu_);
    MaterializationJob& job = job_ref(job_id);
    if (job.state == JobState::Queued) {
      if (job.suspended) raise(ErrorKind::InvalidState, job_id + " is suspended behind a backfill");
      if (overlaps_running(job)) raise(ErrorKind::InvalidState, job_id + " overlaps a running job");
      start_locked(job, nullptr);
    } else if (job.state != JobState::Running) {
      raise(ErrorKind::InvalidState, job_id + " is " + std::string(to_string(job.state)));
    }
  }
  return execute(job_id, now);
}

JobResult Scheduler::retry(const std::string& id, Timestamp now) {
  {
    std::lock_guard lock(mu_);
    MaterializationJob& job = job_ref(id);
    if (job.state != JobState::Failed) {
      raise(ErrorKind::InvalidState, id + " is " + std::string(to_string(job.state)) + ", only failed jobs retry");
    }
    if (job.attempt >= options_.max_attempts) {
      raise(ErrorKind::InvalidState, id + " exhausted its " + std::to_string(options_.max_attempts) + " attempts");
    }
    if (overlaps_running(job)) raise(ErrorKind::InvalidState, id + " overlaps a running job");
    for (auto& [sink, status] : job.sink_status) {
      if (status == SinkStatus::Failed) status = SinkStatus::Pending;
    }
    job.state = JobState::Running;
    job.attempt += 1;
    job.finished_at.reset();
    persist_state(job);
  }
  return execute(id, now);
}

JobResult Scheduler::retry(const std::string& job_id) { return retry(job_id, clock_.now()); }

void Scheduler::cancel(const std::string& job_id) {
  std::lock_guard lock(mu_);
  MaterializationJob& job = job_ref(job_id);
  if (job.state != JobState::Queued && job.state != JobState::Failed) {
    raise(ErrorKind::InvalidState, job_id + " is " + std::string(to_string(job.state)) + " and cannot be canceled");
  }
  job.state = JobState::Canceled;
  job.suspended = false;
  job.finished_at = clock_.now();
  persist_state(job);
  resume_after_backfill_locked(job);
}

std::vector<JobTransition> Scheduler::tick(Timestamp now) {
  std::vector<JobTransition> transitions;

  if (options_.retry_on_tick) {
    std::vector<std::string> retryable;
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, job] : jobs_) {
        if (job.state == JobState::Failed && job.attempt < options_.max_attempts && !overlaps_running(job)) {
          retryable.push_back(id);
        }
      }
    }
    for (const auto& id : retryable) {
      try {
        JobResult r = retry(id, now);
        transitions.push_back({id, JobState::Failed, JobState::Running});
        transitions.push_back({id, JobState::Running, r.job.state});
      } catch (const Error&) {
        // became ineligible since it was listed
      }
    }
  }

  std::vector<std::string> started;
  {
    std::vector<FeatureSetSpec> specs = registry_.list_feature_sets();
    std::lock_guard lock(mu_);
    for (const auto& spec : specs) {
      if (!spec.materialization.any_sink()) continue;
      auto tile = next_tile(spec, now);
      if (!tile) continue;
      MaterializationJob job;
      job.job_id = next_job_id();
      job.fsv = spec.ref();
      job.window = *tile;
      job.kind = JobKind::Scheduled;
      job.policy = spec.materialization;
      job.created_at = now;
      if (spec.materialization.offline_enabled) job.sink_status[Sink::Offline] = SinkStatus::Pending;
      if (spec.materialization.online_enabled) job.sink_status[Sink::Online] = SinkStatus::Pending;
      persist_state(job);
      transitions.push_back({job.job_id, std::nullopt, JobState::Queued});
      jobs_.emplace(job.job_id, std::move(job));
    }

    std::vector<MaterializationJob*> runnable;
    for (auto& [id, job] : jobs_) {
      if (job.state == JobState::Queued && !job.suspended) runnable.push_back(&job);
    }
    std::stable_sort(runnable.begin(), runnable.end(), [](const auto* a, const auto* b) {
      if (a->kind != b->kind) return a->kind == JobKind::Backfill;
      return a->window.start_ts < b->window.start_ts;
    });
    size_t running = std::count_if(jobs_.begin(), jobs_.end(),
                                   [](const auto& kv) { return kv.second.state == JobState::Running; });
    for (auto* job : runnable) {
      if (options_.max_running_jobs != 0 && running >= options_.max_running_jobs) break;
      if (overlaps_running(*job)) continue;
      ++running;
      start_locked(*job, &transitions);
      started.push_back(job->job_id);
    }
  }

  if (options_.run_on_tick) {
    for (const auto& id : started) {
      JobResult r = execute(id, now);
      transitions.push_back({id, JobState::Running, r.job.state});
    }
  }
  return transitions;
}

MaterializationJob Scheduler::job_status(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) raise(ErrorKind::NotFound, "job '" + job_id + "' not found");
  return it->second;
}

std::vector<MaterializationJob> Scheduler::jobs(const std::optional<FeatureSetRef>& fsv) const {
  std::lock_guard lock(mu_);
  std::vector<MaterializationJob> out;
  for (const auto& [id, job] : jobs_) {
    if (!fsv || job.fsv == *fsv) out.push_back(job);
  }
  return out;
}

IntervalSet Scheduler::data_state(const FeatureSetRef& fsv) const {
  std::lock_guard lock(mu_);
  auto it = data_state_.find(fsv);
  return it == data_state_.end() ? IntervalSet{} : it->second;
}

void Scheduler::set_schedule_origin(const FeatureSetRef& fsv, Timestamp origin) {
  if (origin < 0) raise(ErrorKind::InvalidArgument, "schedule origin must be non-negative");
  std::lock_guard lock(mu_);
  origins_[fsv] = origin;
  persist_origins();
}

void Scheduler::set_sink_merge_hook(SinkMergeHook hook) {
  std::lock_guard lock(mu_);
  hook_ = std::move(hook);
}

BootstrapReport Scheduler::bootstrap(const FeatureSetRef& fsv, BootstrapDirection direction) {
  FeatureSetSpec spec = registry_.get_feature_set(fsv);
  std::lock_guard lock(mu_);
  for (const auto& [id, job] : jobs_) {
    if (job.fsv == fsv && job.state == JobState::Running) {
      raise(ErrorKind::InvalidState, "bootstrap of " + to_string(fsv) + " must wait for running job " + id);
    }
  }
  if (direction == BootstrapDirection::OfflineToOnline) {
    if (!spec.materialization.online_enabled) raise(ErrorKind::NoSinkEnabled, "online store is not enabled for " + to_string(fsv));
    return bootstrap_offline_to_online(offline_, online_, fsv, spec.materialization.ttl);
  }
  if (!spec.materialization.offline_enabled) raise(ErrorKind::NoSinkEnabled, "offline store is not enabled for " + to_string(fsv));
  return bootstrap_online_to_offline(online_, offline_, fsv);
}

std::vector<std::string> Scheduler::invariant_violations() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (auto a = jobs_.begin(); a != jobs_.end(); ++a) {
    const auto& x = a->second;
    if (x.state == JobState::Succeeded) {
      auto ds = data_state_.find(x.fsv);
      if (ds == data_state_.end() || !ds->second.covers(x.window)) out.push_back(x.job_id + " succeeded but its window is not materialized");
      for (const auto& [sink, status] : x.sink_status) {
        if (status != SinkStatus::Merged) out.push_back(x.job_id + " succeeded with an unmerged sink");
      }
    }
    if (x.state != JobState::Running) continue;
    for (auto b = std::next(a); b != jobs_.end(); ++b) {
      const auto& y = b->second;
      if (y.state == JobState::Running && y.fsv == x.fsv && y.window.overlaps(x.window)) {
        out.push_back(x.job_id + " and " + y.job_id + " run on overlapping windows");
      }
    }
  }
  for (const auto& [fsv, set] : data_state_) {
    const auto& ivs = set.intervals();
    for (size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i - 1].end_ts >= ivs[i].start_ts) out.push_back("data state of " + to_string(fsv) + " is not coalesced");
    }
  }
  return out;
}

}  // namespace fstore
