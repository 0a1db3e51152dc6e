// Acceptance suite: one line per criterion, non-zero exit when any fails or runs over its limit.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "fstore/error.hpp"
#include "fstore/feature_store.hpp"
#include "fstore/file_util.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fstore {
namespace {

namespace fsys = std::filesystem;
using testing::Rng;
using testing::uniform;

const FeatureSetRef kFs{"value_fs", 1};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failed_;
    if (messages_.size() < 5) messages_.push_back(what);
  }
  size_t checks() const { return checks_; }
  size_t failed() const { return failed_; }
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  size_t checks_ = 0;
  size_t failed_ = 0;
  std::vector<std::string> messages_;
};

struct StoreState {
  std::vector<FeatureRecord> offline;
  std::vector<OnlineEntry> online;
  friend bool operator==(const StoreState&, const StoreState&) = default;
};

StoreState snapshot(FeatureStore& store) { return {store.offline().scan_offline(kFs), store.online().entries(kFs)}; }

std::string describe(const StoreState& s) {
  std::string out = "offline " + testing::describe(s.offline) + " online [";
  for (const auto& e : s.online) out += testing::describe(e.record) + " ";
  return out + "]";
}

std::string identity(const FeatureRecord& r) {
  return canonical_key(r.ids) + "@" + std::to_string(r.event_ts) + "/" + std::to_string(r.creation_ts);
}

// ---------------------------------------------------------------------------------------------
// 1. late arrival

void late_arrival_scenario(Checker& c) {
  // sink level, with the exact timestamps t0 < t0' < t1 < t1' < t2 < t2' < t3'
  {
    auto la = testing::late_arrival();
    OfflineStore offline;
    OnlineStore online;
    std::vector<FeatureRecord> job1{la.r0, la.r1, la.r2};
    offline.merge_offline(kFs, job1);
    online.merge_online(kFs, job1);
    c.expect(offline.scan_offline(kFs) == testing::sorted_records(job1), "after job 1 offline holds R0 R1 R2");
    auto on = online.entries(kFs);
    c.expect(on.size() == 1 && on[0].record == la.r2, "after job 1 online holds R2");
    std::vector<FeatureRecord> job2{la.r3};
    offline.merge_offline(kFs, job2);
    online.merge_online(kFs, job2);
    c.expect(offline.scan_offline(kFs) == testing::sorted_records({la.r0, la.r1, la.r2, la.r3}),
             "after job 2 offline holds R0 R1 R2 R3");
    on = online.entries(kFs);
    c.expect(on.size() == 1 && on[0].record == la.r2, "after job 2 online still holds R2");
  }

  // the same through materialization jobs; the second job re-emits event time 2000
  testing::TempDir dir;
  ManualClock clock(0);
  FeatureStore store(std::nullopt, clock);
  testing::register_synthetic(store, dir / "src", testing::policy(true, true, 1000));
  store.transforms().register_hook("values", [](const Frame&, const TransformContext& ctx) {
    Frame out;
    out.schema = {{"customer_id", ScalarType::String}, {"ts", ScalarType::Int64}, {"value", ScalarType::Float64}};
    if (ctx.feature_window.start_ts == 0) {
      for (Timestamp t : {1000, 2000, 3000}) out.rows.push_back({"c1", t, static_cast<double>(t / 100)});
    } else {
      out.rows.push_back({"c1", std::int64_t{2000}, 21.0});
    }
    return out;
  });
  clock.set(3500);
  store.scheduler().run_job(store.scheduler().request_backfill(kFs, {0, 3001}));
  auto r = [](Timestamp e, Timestamp cr, double v) { return testing::rec("c1", e, cr, v); };
  c.expect(store.offline().scan_offline(kFs) == std::vector{r(1000, 3500, 10), r(2000, 3500, 20), r(3000, 3500, 30)},
           "job 1 offline: " + testing::describe(store.offline().scan_offline(kFs)));
  auto on = store.online().entries(kFs);
  c.expect(on.size() == 1 && on[0].record == r(3000, 3500, 30), "job 1 online holds the t2 record");
  clock.set(4000);
  store.scheduler().run_job(store.scheduler().request_backfill(kFs, {2000, 2001}));
  c.expect(store.offline().scan_offline(kFs) ==
               std::vector{r(1000, 3500, 10), r(2000, 3500, 20), r(2000, 4000, 21), r(3000, 3500, 30)},
           "job 2 offline: " + testing::describe(store.offline().scan_offline(kFs)));
  on = store.online().entries(kFs);
  c.expect(on.size() == 1 && on[0].record == r(3000, 3500, 30), "job 2 leaves the t2 record online");
}

// ---------------------------------------------------------------------------------------------
// 2. merge permutations

// Merges `order` split at `cuts` into fresh stores and compares with the oracles and with the
// order-free description of the result.
void check_merge(Checker& c, const std::vector<FeatureRecord>& order, const std::vector<size_t>& cuts) {
  OfflineStore offline;
  OnlineStore online;
  size_t begin = 0;
  for (size_t i = 0; i <= cuts.size(); ++i) {
    size_t end = i < cuts.size() ? cuts[i] : order.size();
    std::span<const FeatureRecord> batch(order.data() + begin, end - begin);
    offline.merge_offline(kFs, batch);
    online.merge_online(kFs, batch);
    begin = end;
  }
  std::vector<FeatureRecord> got_online;
  for (const auto& e : online.entries(kFs)) got_online.push_back(e.record);
  std::vector<FeatureRecord> got_offline = offline.scan_offline(kFs);

  c.expect(got_offline == testing::oracle::offline_state(order), "offline differs for " + testing::describe(order));
  c.expect(got_online == testing::oracle::online_state(order), "online differs for " + testing::describe(order));

  std::set<std::string> distinct;
  std::map<std::string, std::pair<Timestamp, Timestamp>> best;
  for (const auto& r : order) {
    distinct.insert(identity(r));
    auto [it, fresh] = best.try_emplace(canonical_key(r.ids), r.event_ts, r.creation_ts);
    if (!fresh) it->second = std::max(it->second, std::pair{r.event_ts, r.creation_ts});
  }
  std::set<std::string> offline_ids;
  for (const auto& r : got_offline) offline_ids.insert(identity(r));
  c.expect(offline_ids == distinct && got_offline.size() == distinct.size(), "offline is not the deduplicated set");
  bool max_ok = got_online.size() == best.size();
  for (const auto& r : got_online) {
    max_ok = max_ok && best[canonical_key(r.ids)] == std::pair{r.event_ts, r.creation_ts};
  }
  c.expect(max_ok, "online is not the per-key maximum for " + testing::describe(order));
}

std::vector<size_t> random_cuts(Rng& rng, size_t n) {
  std::vector<size_t> cuts;
  for (size_t i = 1; i < n; ++i) {
    if (testing::chance(rng, 0.4)) cuts.push_back(i);
  }
  return cuts;
}

void merge_permutations(Checker& c) {
  // universe: 2 keys x 2 event times x 2 creation times; equal identities carry equal values
  std::vector<FeatureRecord> universe;
  for (const char* key : {"a", "b"}) {
    for (Timestamp e : {1, 2}) {
      for (Timestamp cr : {3, 4}) {
        universe.push_back(testing::rec(key, e, cr, static_cast<double>(universe.size())));
      }
    }
  }
  Rng rng(2024);
  std::vector<int> counts(universe.size(), 0);
  std::function<void(size_t, int)> visit = [&](size_t item, int left) {
    if (item == universe.size()) {
      std::vector<size_t> idx;
      for (size_t i = 0; i < counts.size(); ++i) idx.insert(idx.end(), counts[i], i);
      std::vector<FeatureRecord> order;
      if (idx.size() <= 4) {
        // every distinct permutation in every batching
        do {
          order.clear();
          for (size_t i : idx) order.push_back(universe[i]);
          for (unsigned mask = 0; mask < (1u << (order.empty() ? 0 : order.size() - 1)); ++mask) {
            std::vector<size_t> cuts;
            for (size_t b = 0; b + 1 < order.size(); ++b) {
              if (mask & (1u << b)) cuts.push_back(b + 1);
            }
            check_merge(c, order, cuts);
          }
        } while (std::next_permutation(idx.begin(), idx.end()));
      } else {
        for (int k = 0; k < 6; ++k) {
          std::shuffle(idx.begin(), idx.end(), rng);
          order.clear();
          for (size_t i : idx) order.push_back(universe[i]);
          check_merge(c, order, random_cuts(rng, order.size()));
        }
      }
      return;
    }
    for (int n = 0; n <= left; ++n) {
      counts[item] = n;
      visit(item + 1, left - n);
    }
    counts[item] = 0;
  };
  visit(0, 6);

  // random multisets with wider timestamps and values that may differ under one identity
  for (int round = 0; round < 1000; ++round) {
    std::vector<FeatureRecord> records;
    for (int i = 0, n = static_cast<int>(uniform(rng, 1, 6)); i < n; ++i) {
      if (!records.empty() && testing::chance(rng, 0.2)) {
        FeatureRecord copy = records[uniform(rng, 0, records.size() - 1)];
        if (testing::chance(rng, 0.5)) copy.features[0].second = static_cast<double>(uniform(rng, 0, 9));
        records.push_back(copy);
        continue;
      }
      Timestamp e = uniform(rng, 0, 5);
      records.push_back(testing::rec(testing::chance(rng, 0.5) ? "a" : "b", e, e + uniform(rng, 1, 3),
                                     static_cast<double>(uniform(rng, 0, 9))));
    }
    for (int k = 0; k < 5; ++k) {
      std::shuffle(records.begin(), records.end(), rng);
      check_merge(c, records, random_cuts(rng, records.size()));
    }
  }
}

// ---------------------------------------------------------------------------------------------
// 3. windowed calculation

struct DslSetup {
  dsl::DslProgram program;
  FeatureSetSpec spec;
  Frame source;
};

// Registers a random program over a random transactions source written below `dir`.
DslSetup random_dsl_feature_set(Rng& rng, FeatureStore& store, const fsys::path& dir, Duration interval) {
  DslSetup s;
  s.source = testing::random_transactions(rng, static_cast<size_t>(uniform(rng, 1, 200)), 60 * kMinute);
  testing::write_jsonl(dir / "part-0.jsonl", testing::frame_to_json(s.source));
  s.program = testing::random_program(rng);
  dsl::BindOptions opts{s.source.schema, {{"customer_id", ScalarType::String}}, "ts", "ts", interval};
  dsl::BoundProgram bound = dsl::bind(s.program, opts);

  store.registry().register_entity(testing::customer_entity());
  s.spec.name = "calc";
  s.spec.version = 1;
  s.spec.entities = {{"customer", 1}};
  Duration needed = s.program.aggregations.empty() ? interval : s.program.max_window();
  s.spec.source = {fsys::absolute(dir).string(), "ts", needed + uniform(rng, 0, 3) * kMinute, 0};
  s.spec.transformation.kind = TransformKind::Dsl;
  s.spec.transformation.dsl_program = dsl::pretty_print(s.program);
  s.spec.features.assign(bound.output_schema.begin() + 2, bound.output_schema.end());
  s.spec.timestamp_column = "ts";
  s.spec.materialization = testing::policy(true, false, interval);
  s.spec = store.registry().register_feature_set(s.spec);
  return s;
}

void windowed_calculation(Checker& c) {
  Rng rng(303);
  for (int round = 0; round < 120; ++round) {
    testing::TempDir dir;
    ManualClock clock(0);
    FeatureStore store(std::nullopt, clock);
    Duration interval = uniform(rng, 1, 3) * kMinute;
    DslSetup s = random_dsl_feature_set(rng, store, dir / "src", interval);
    FeatureWindow window{uniform(rng, 0, 30) * kMinute + uniform(rng, 0, 1) * 17, 0};
    window.end_ts = window.start_ts + uniform(rng, 1, 50) * kMinute + uniform(rng, 0, 1) * 29;
    const Timestamp now = 200 * kMinute;
    const std::string text = s.spec.transformation.dsl_program;

    auto whole = store.calculator().calculate(s.spec, window, now);
    auto expected = testing::oracle::dsl_records(
        testing::oracle::run_dsl(s.program, s.source, {"customer_id"}, "ts", interval, window),
        {{"customer_id", ScalarType::String}}, s.program, s.spec.features, now);
    std::string why;
    c.expect(testing::records_near(whole, expected, 1e-9, &why), "calculate vs oracle: " + why + "\n" + text);

    // k sub-windows
    int k = static_cast<int>(uniform(rng, 2, 5));
    std::vector<Timestamp> cuts{window.start_ts, window.end_ts};
    for (int i = 1; i < k; ++i) cuts.push_back(uniform(rng, window.start_ts + 1, window.end_ts - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<FeatureRecord> pieces;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      auto part = store.calculator().calculate(s.spec, {cuts[i], cuts[i + 1]}, now);
      pieces.insert(pieces.end(), part.begin(), part.end());
    }
    c.expect(testing::sorted_records(pieces) == testing::sorted_records(whole),
             "split into " + std::to_string(cuts.size() - 1) + " windows differs\n" + text);
  }
}

// ---------------------------------------------------------------------------------------------
// 4. leakage

void leakage(Checker& c) {
  Rng rng(404);
  testing::TempDir dir;
  for (int round = 0; round < 1000; ++round) {
    ManualClock clock(0);
    FeatureStore store(std::nullopt, clock);
    Duration delay = uniform(rng, 0, 3) * 25;
    testing::register_synthetic(store, dir / "src", testing::policy(true, true, 100), 100, 2, delay);
    std::vector<FeatureRecord> records;
    for (int i = 0, n = static_cast<int>(uniform(rng, 0, 40)); i < n; ++i) {
      Timestamp e = uniform(rng, 0, 500);
      records.push_back(testing::rec("c" + std::to_string(uniform(rng, 0, 3)), e, e + uniform(rng, 1, 200),
                                     static_cast<double>(uniform(rng, 0, 999))));
    }
    store.offline().merge_offline(kFs, records);
    std::vector<FeatureRecord> stored = store.offline().scan_offline(kFs);

    ObservationSpine spine;
    for (int i = 0, n = static_cast<int>(uniform(rng, 1, 20)); i < n; ++i) {
      spine.add_row(uniform(rng, 0, 700), {{"customer_id", "c" + std::to_string(uniform(rng, 0, 4))}});
    }
    std::optional<Timestamp> as_of;
    if (testing::chance(rng, 0.25)) as_of = uniform(rng, 0, 700);
    RetrievalResult result = store.retriever().get_offline_features(spine, {{kFs, {}}}, as_of);
    auto audit = audit_leakage(result);
    c.expect(audit.empty(), "leakage: " + (audit.empty() ? std::string() : audit.front()));

    for (size_t r = 0; r < spine.rows.size(); ++r) {
      // linear scan: the greatest (event_ts, creation_ts) strictly before the cutoff
      const Timestamp cutoff = spine.rows[r].observation_ts - delay;
      const FeatureRecord* want = nullptr;
      for (const auto& rec : stored) {
        if (rec.ids[0].second != spine.rows[r].values[0] || rec.event_ts >= cutoff) continue;
        if (as_of && rec.creation_ts > *as_of) continue;
        if (!want || std::pair{want->event_ts, want->creation_ts} < std::pair{rec.event_ts, rec.creation_ts}) want = &rec;
      }
      const Cell& got = result.cells[r][0];
      if (want) {
        c.expect(got.status == CellStatus::Value && got.value == want->features[0].second &&
                     got.event_ts == want->event_ts && got.creation_ts == want->creation_ts,
                 "row " + std::to_string(r) + " should join " + testing::describe(*want));
      } else {
        c.expect(got.status != CellStatus::Value && is_null(got.value), "row " + std::to_string(r) + " should be empty");
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------
// 5-7. fault handling

struct JobPlan {
  FeatureWindow window;
  Timestamp now;
};

// Disjoint windows issued out of event-time order, so later jobs carry older events.
const std::vector<JobPlan> kThreeJobs = {{{600, 900}, 1000}, {{0, 300}, 2000}, {{300, 600}, 3000}};
constexpr Duration kTtl = 100'000;

std::unique_ptr<FeatureStore> synthetic_store(const fsys::path& src, ManualClock& clock, MaterializationPolicy p,
                                              std::optional<fsys::path> root = std::nullopt,
                                              SchedulerOptions options = {}) {
  if (root) FeatureStore::init(*root);
  auto store = std::make_unique<FeatureStore>(root, clock, options);
  testing::register_synthetic(*store, src, p, 50, 3);
  return store;
}

StoreState fault_free_run(const std::vector<JobPlan>& jobs, MaterializationPolicy p) {
  testing::TempDir dir;
  ManualClock clock(0);
  auto store = synthetic_store(dir / "src", clock, p);
  for (const auto& j : jobs) {
    clock.set(j.now);
    store->scheduler().run_job(store->scheduler().request_backfill(kFs, j.window));
  }
  return snapshot(*store);
}

using FailurePlan = std::map<std::pair<size_t, Sink>, int>;  // (job, sink) -> attempts that fail

void run_with_failures(Checker& c, const FailurePlan& plan, Rng* rng, const StoreState& expected,
                       const std::string& label) {
  testing::TempDir dir;
  ManualClock clock(0);
  SchedulerOptions options;
  options.max_attempts = 6;
  auto store = synthetic_store(dir / "src", clock, testing::policy(true, true, 100, kTtl), std::nullopt, options);
  Scheduler& sched = store->scheduler();
  std::map<std::string, size_t> job_index;
  std::map<std::pair<size_t, Sink>, int> attempts;
  sched.set_sink_merge_hook([&](const MaterializationJob& job, Sink sink) {
    auto key = std::pair{job_index.at(job.job_id), sink};
    auto it = plan.find(key);
    if (++attempts[key] <= (it == plan.end() ? 0 : it->second)) {
      throw Error(ErrorKind::StoreIoError, "injected " + std::string(to_string(sink)) + " failure");
    }
  });

  Timestamp now = 0;
  std::vector<std::string> ids;
  auto retry_some = [&](double p) {
    for (const auto& id : ids) {
      if (sched.job_status(id).state != JobState::Failed) continue;
      if (rng && !testing::chance(*rng, p)) continue;
      now += rng ? uniform(*rng, 0, 50) : 10;
      sched.retry(id, now);
    }
  };
  for (size_t i = 0; i < kThreeJobs.size(); ++i) {
    now = std::max(now, kThreeJobs[i].now);
    clock.set(now);
    std::string id = sched.request_backfill(kFs, kThreeJobs[i].window);
    job_index[id] = i;
    ids.push_back(id);
    sched.run_job(id);
    if (rng) retry_some(0.5);
  }
  for (int pass = 0; pass < 6; ++pass) retry_some(1.0);

  bool all_done = std::all_of(ids.begin(), ids.end(), [&](const auto& id) {
    return sched.job_status(id).state == JobState::Succeeded;
  });
  c.expect(all_done, label + ": jobs still failing after retries");
  c.expect(sched.invariant_violations().empty(), label + ": scheduler invariants violated");
  auto report = store->check_consistency(kFs, now);
  c.expect(report.consistent(), label + ": divergences " + report.to_json().dump());
  StoreState got = snapshot(*store);
  c.expect(got == expected, label + ": stores differ from the fault-free run\n got " + describe(got) +
                                "\nwant " + describe(expected));
}

void faults(Checker& c) {
  StoreState expected = fault_free_run(kThreeJobs, testing::policy(true, true, 100, kTtl));
  for (unsigned mask = 0; mask < 64; ++mask) {
    FailurePlan plan;
    for (size_t job = 0; job < 3; ++job) {
      if (mask & (1u << (2 * job))) plan[{job, Sink::Offline}] = 1;
      if (mask & (1u << (2 * job + 1))) plan[{job, Sink::Online}] = 1;
    }
    run_with_failures(c, plan, nullptr, expected, "pattern " + std::to_string(mask));
  }
  Rng rng(505);
  for (int round = 0; round < 500; ++round) {
    FailurePlan plan;
    for (size_t job = 0; job < 3; ++job) {
      for (Sink sink : {Sink::Offline, Sink::Online}) {
        if (testing::chance(rng, 0.5)) plan[{job, sink}] = static_cast<int>(uniform(rng, 1, 3));
      }
    }
    run_with_failures(c, plan, &rng, expected, "random schedule " + std::to_string(round));
  }
}

void crash_resume(Checker& c) {
  const StoreState expected = fault_free_run(kThreeJobs, testing::policy(true, true, 100, kTtl));
  for (Sink crash_at : {Sink::Online, Sink::Offline}) {
    const std::string label = std::string("crash before ") + std::string(to_string(crash_at)) + " merge";
    testing::TempDir dir;
    const fsys::path root = dir / "store";
    ManualClock clock(0);
    std::string crashed;
    std::string staged_before;
    {
      auto store = synthetic_store(dir / "src", clock, testing::policy(true, true, 100, kTtl), root);
      clock.set(kThreeJobs[0].now);
      store->scheduler().run_job(store->scheduler().request_backfill(kFs, kThreeJobs[0].window));
      store->scheduler().set_sink_merge_hook([crash_at](const MaterializationJob&, Sink sink) {
        if (sink == crash_at) throw std::runtime_error("process killed");
      });
      clock.set(kThreeJobs[1].now);
      crashed = store->scheduler().request_backfill(kFs, kThreeJobs[1].window);
      bool aborted = false;
      try {
        store->scheduler().run_job(crashed);
      } catch (const std::runtime_error&) {
        aborted = true;
      }
      c.expect(aborted, label + ": the simulated crash did not abort the job");
      staged_before = read_file(root / "jobs" / crashed / "staged.jsonl");
    }

    clock.set(kThreeJobs[1].now + 777);
    FeatureStore restarted(root, clock);
    testing::register_synthetic_hook(restarted, 50, 3);
    MaterializationJob job = restarted.scheduler().job_status(crashed);
    c.expect(job.state == JobState::Failed && job.last_error.find("interrupted") != std::string::npos,
             label + ": restart should mark the job failed, got " + std::string(to_string(job.state)));
    JobResult retried = restarted.scheduler().retry(crashed);
    c.expect(retried.job.state == JobState::Succeeded, label + ": retry failed: " + retried.job.last_error);
    c.expect(retried.job.staged_at == kThreeJobs[1].now, label + ": staged creation_ts changed");
    c.expect(read_file(root / "jobs" / crashed / "staged.jsonl") == staged_before, label + ": staged records rewritten");
    for (const auto& r : restarted.offline().scan_offline(kFs, kThreeJobs[1].window)) {
      c.expect(r.creation_ts == kThreeJobs[1].now, label + ": record restamped " + testing::describe(r));
    }
    clock.set(kThreeJobs[2].now);
    restarted.scheduler().run_job(restarted.scheduler().request_backfill(kFs, kThreeJobs[2].window));
    StoreState got = snapshot(restarted);
    c.expect(got == expected, label + ": final state differs\n got " + describe(got) + "\nwant " + describe(expected));

    // and once more from disk alone
    FeatureStore reopened(root, clock);
    c.expect(snapshot(reopened) == expected, label + ": reloaded state differs");
  }
}

void bootstrap_equivalence(Checker& c) {
  const std::vector<JobPlan> jobs = {
      {{800, 1000}, 1000}, {{0, 200}, 2000}, {{400, 600}, 3000}, {{200, 400}, 4000}, {{600, 800}, 5000}};
  for (std::optional<Duration> ttl : {std::optional<Duration>{}, std::optional<Duration>{2500}}) {
    const std::string label = ttl ? "ttl " + std::to_string(*ttl) : "no ttl";
    StoreState dual = fault_free_run(jobs, testing::policy(true, true, 100, ttl));

    testing::TempDir dir;
    ManualClock clock(0);
    auto store = synthetic_store(dir / "src", clock, testing::policy(true, false, 100, ttl));
    for (const auto& j : jobs) {
      clock.set(j.now);
      store->scheduler().run_job(store->scheduler().request_backfill(kFs, j.window));
    }
    c.expect(store->online().entries(kFs).empty(), label + ": online store should start empty");
    FeatureSetPatch patch;
    patch.materialization = FeatureSetPatch::Policy{};
    patch.materialization->online_enabled = true;
    store->registry().update_feature_set(kFs.name, kFs.version, patch);
    clock.set(6000);
    store->scheduler().bootstrap(kFs, BootstrapDirection::OfflineToOnline);
    StoreState got = snapshot(*store);
    c.expect(got.online == dual.online, label + ": bootstrapped online store differs\n got " + describe(got) +
                                            "\nwant " + describe(dual));
    c.expect(got.offline == dual.offline, label + ": offline stores differ");
  }
}

// ---------------------------------------------------------------------------------------------
// 8. coverage

void coverage(Checker& c) {
  testing::TempDir dir;
  ManualClock clock(0);
  auto store = synthetic_store(dir / "src", clock, testing::policy(true, true, 100));
  Rng rng(808);
  auto statuses = [&](Timestamp lo, Timestamp hi, const std::vector<std::string>& ids) {
    ObservationSpine spine;
    for (int i = 0; i < 100; ++i) {
      spine.add_row(uniform(rng, lo, hi), {{"customer_id", ids[uniform(rng, 0, ids.size() - 1)]}});
    }
    std::set<CellStatus> seen;
    for (const auto& row : store->retriever().get_offline_features(spine, {{kFs, {}}}).cells) seen.insert(row[0].status);
    return seen;
  };
  const std::set<CellStatus> not_materialized{CellStatus::NotMaterialized};
  const std::set<CellStatus> no_data{CellStatus::NoData};

  c.expect(statuses(1, 5000, {"c0", "c1", "c9"}) == not_materialized, "fresh store: every cell not_materialized");

  // a failed job materializes nothing
  store->scheduler().set_sink_merge_hook([](const MaterializationJob&, Sink sink) {
    if (sink == Sink::Offline) throw Error(ErrorKind::StoreIoError, "offline unavailable");
  });
  clock.set(3000);
  std::string failed = store->scheduler().request_backfill(kFs, {0, 1000});
  store->scheduler().run_job(failed);
  c.expect(statuses(1, 5000, {"c0", "c1"}) == not_materialized, "after a failed job: every cell not_materialized");
  store->scheduler().cancel(failed);

  store->scheduler().set_sink_merge_hook(nullptr);
  store->scheduler().run_job(store->scheduler().request_backfill(kFs, {0, 1000}));
  c.expect(statuses(1, 1000, {"c8", "c9"}) == no_data, "materialized window, unknown ids: every cell no_data");
  c.expect(statuses(1002, 5000, {"c8", "c9"}) == not_materialized, "beyond the materialized window: not_materialized");
  c.expect(statuses(1, 1000, {"c0"}).count(CellStatus::NotMaterialized) == 0, "known ids inside the window");
}

// ---------------------------------------------------------------------------------------------
// 9. DSL

void dsl_oracle(Checker& c) {
  Rng rng(909);
  for (int round = 0; round < 500; ++round) {
    dsl::DslProgram p = testing::random_program(rng);
    Duration interval = uniform(rng, 1, 3) * kMinute;
    Frame source = testing::random_transactions(rng, static_cast<size_t>(uniform(rng, 0, 150)), 45 * kMinute);
    FeatureWindow window{uniform(rng, 0, 20) * kMinute / 2, 0};
    window.end_ts = window.start_ts + uniform(rng, 1, 60) * kMinute / 2;
    dsl::BindOptions opts{{{"ts", ScalarType::Int64},
                           {"customer_id", ScalarType::String},
                           {"qty", ScalarType::Int64},
                           {"price", ScalarType::Float64}},
                          {{"customer_id", ScalarType::String}},
                          "ts",
                          "ts",
                          interval};
    Frame out = dsl::execute(dsl::bind(p, opts), source, window);
    auto expected = testing::oracle::run_dsl(p, source, {"customer_id"}, "ts", interval, window);
    bool same = out.rows.size() == expected.size();
    for (size_t i = 0; same && i < expected.size(); ++i) {
      const Row& row = out.rows[i];
      same = row[0] == expected[i].key[0] && row[1] == Scalar{expected[i].t} &&
             row.size() == 2 + expected[i].outputs.size();
      for (size_t k = 0; same && k < expected[i].outputs.size(); ++k) {
        same = row[2 + k].index() == expected[i].outputs[k].index() &&
               testing::scalar_near(row[2 + k], expected[i].outputs[k], 1e-9);
      }
    }
    c.expect(same, "executor differs from rescan for\n" + dsl::pretty_print(p));
  }
  for (int round = 0; round < 500; ++round) {
    dsl::DslProgram p = testing::random_program(rng);
    std::string text = dsl::pretty_print(p);
    dsl::DslProgram back = dsl::parse(text);
    c.expect(back == p && dsl::pretty_print(back) == text, "round trip changed\n" + text);
  }
}

// ---------------------------------------------------------------------------------------------
// 10. online/offline agreement

void online_offline_agreement(Checker& c) {
  Rng rng(1010);
  testing::TempDir dir;
  for (int round = 0; round < 150; ++round) {
    ManualClock clock(0);
    std::optional<Duration> ttl;
    if (testing::chance(rng, 0.5)) ttl = uniform(rng, 100, 3000);
    auto store = synthetic_store(dir / "src", clock, testing::policy(true, true, 100, ttl));
    const std::uint64_t seed = rng();
    store->transforms().register_hook("values", [seed](const Frame&, const TransformContext& ctx) {
      Rng local(seed ^ static_cast<std::uint64_t>(ctx.feature_window.start_ts * 7919));
      Frame out;
      out.schema = {{"customer_id", ScalarType::String}, {"ts", ScalarType::Int64}, {"value", ScalarType::Float64}};
      for (int cust = 0; cust < 4; ++cust) {
        std::set<Timestamp> times;
        for (int i = 0, n = static_cast<int>(uniform(local, 0, 3)); i < n; ++i) {
          times.insert(uniform(local, ctx.feature_window.start_ts, ctx.feature_window.end_ts - 1));
        }
        for (Timestamp t : times) {
          out.rows.push_back({"c" + std::to_string(cust), t, static_cast<double>(uniform(local, 0, 999))});
        }
      }
      return out;
    });

    std::vector<Timestamp> starts{0, 200, 400, 600, 800};
    std::shuffle(starts.begin(), starts.end(), rng);
    Timestamp now = 1000;
    for (Timestamp s : starts) {
      if (testing::chance(rng, 0.2)) continue;
      now += uniform(rng, 1, 1500);
      clock.set(now);
      store->scheduler().run_job(store->scheduler().request_backfill(kFs, {s, s + 200}));
    }
    now += uniform(rng, 0, 3000);

    ObservationSpine spine;
    for (int cust = 0; cust < 5; ++cust) spine.add_row(now + 1, {{"customer_id", "c" + std::to_string(cust)}});
    RetrievalResult offline = store->retriever().get_offline_features(spine, {{kFs, {}}});
    for (int cust = 0; cust < 5; ++cust) {
      NamedValues ids{{"customer_id", "c" + std::to_string(cust)}};
      auto online = store->retriever().get_online_features({{kFs, {}}}, ids, now);
      const Cell& cell = offline.cells[cust][0];
      const std::string where = "round " + std::to_string(round) + " c" + std::to_string(cust);
      if (online[0].value) {
        c.expect(cell.status == CellStatus::Value && cell.value == *online[0].value &&
                     cell.event_ts == online[0].event_ts && cell.creation_ts == online[0].creation_ts,
                 where + ": offline join disagrees with the online value");
      } else if (online[0].missing == MissingReason::NeverMaterialized) {
        c.expect(cell.status != CellStatus::Value, where + ": offline has a value the online store never saw");
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------

struct Criterion {
  int number;
  const char* name;
  std::optional<double> limit_seconds;
  std::function<void(Checker&)> run;
};

}  // namespace
}  // namespace fstore

int main() {
  using namespace fstore;
  const std::vector<Criterion> criteria = {
      {1, "late arrival keeps the newest event online", 1.0, late_arrival_scenario},
      {2, "merge order and batching do not matter", 10.0, merge_permutations},
      {3, "windowed calculation matches the oracle and splits cleanly", 10.0, windowed_calculation},
      {4, "point-in-time joins never leak", 30.0, leakage},
      {5, "stores converge after injected sink failures", 30.0, faults},
      {6, "crash between sinks resumes to the fault-free state", std::nullopt, crash_resume},
      {7, "bootstrap rebuilds the dual-write online store", std::nullopt, bootstrap_equivalence},
      {8, "not_materialized and no_data are told apart", std::nullopt, coverage},
      {9, "DSL executor matches rescan and printing round-trips", 30.0, dsl_oracle},
      {10, "online values agree with the offline join", std::nullopt, online_offline_agreement},
  };
  int failures = 0;
  for (const auto& cr : criteria) {
    Checker checker;
    std::string crash;
    auto start = std::chrono::steady_clock::now();
    try {
      cr.run(checker);
    } catch (const std::exception& e) {
      crash = e.what();
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_time = !cr.limit_seconds || seconds < *cr.limit_seconds;
    bool pass = crash.empty() && checker.failed() == 0 && checker.checks() > 0 && in_time;
    if (!pass) ++failures;
    std::string limit = cr.limit_seconds ? "limit " + std::to_string(static_cast<int>(*cr.limit_seconds)) + "s" : "no limit";
    std::printf("%s AC%-2d %-60s %zu checks %.3fs (%s)\n", pass ? "PASS" : "FAIL", cr.number, cr.name,
                checker.checks(), seconds, limit.c_str());
    if (!crash.empty()) std::printf("     exception: %s\n", crash.c_str());
    if (!in_time) std::printf("     over the time limit\n");
    if (checker.failed() > 0) {
      std::printf("     %zu failed checks, first ones:\n", checker.failed());
      for (const auto& m : checker.messages()) std::printf("     - %s\n", m.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
