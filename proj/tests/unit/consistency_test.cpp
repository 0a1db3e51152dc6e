#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "fstore/feature_store.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fstore {
namespace {

using testing::rec;

const FeatureSetRef kFs{"value_fs", 1};

std::vector<FeatureRecord> online_records(const OnlineStore& online) {
  std::vector<FeatureRecord> out;
  for (const auto& e : online.entries(kFs)) out.push_back(e.record);
  return out;
}

TEST(BootstrapTest, OfflineToOnlineLoadsLatestPerId) {
  OfflineStore offline;
  OnlineStore online;
  auto la = testing::late_arrival();
  std::vector<FeatureRecord> all{la.r0, la.r1, la.r2, la.r3, rec("c2", 50, 60, 1.0)};
  offline.merge_offline(kFs, all);
  BootstrapReport report = bootstrap_offline_to_online(offline, online, kFs, std::nullopt);
  EXPECT_EQ(report.records_read, 2u);
  EXPECT_EQ(report.records_applied, 2u);
  EXPECT_EQ(online_records(online), testing::oracle::online_state(all));
  EXPECT_TRUE(check_consistency(offline, online, kFs, 5000, std::nullopt).consistent());
  // running it again changes nothing
  EXPECT_EQ(bootstrap_offline_to_online(offline, online, kFs, std::nullopt).records_applied, 0u);
}

TEST(BootstrapTest, OnlineToOfflineCopiesEveryEntry) {
  OfflineStore offline;
  OnlineStore online;
  online.merge_online(kFs, std::vector{rec("c1", 10, 20, 1.0), rec("c2", 30, 40, 2.0)}, 5);
  BootstrapReport report = bootstrap_online_to_offline(online, offline, kFs);
  EXPECT_EQ(report.records_read, 2u);  // expired entries are copied too
  EXPECT_EQ(report.records_applied, 2u);
  EXPECT_EQ(offline.scan_offline(kFs), online_records(online));
  EXPECT_EQ(bootstrap_online_to_offline(online, offline, kFs).records_applied, 0u);
}

TEST(BootstrapTest, DirectionNames) {
  EXPECT_EQ(bootstrap_direction_from_string("offline-to-online"), BootstrapDirection::OfflineToOnline);
  EXPECT_EQ(to_string(BootstrapDirection::OnlineToOffline), "online-to-offline");
  EXPECT_ERROR_KIND(bootstrap_direction_from_string("sideways"), ErrorKind::InvalidArgument);
}

TEST(ConsistencyTest, ReportsEachDivergentKey) {
  OfflineStore offline;
  OnlineStore online;
  offline.merge_offline(kFs, std::vector{rec("c1", 10, 20, 1.0), rec("c2", 10, 20, 2.0), rec("c3", 10, 20, 3.0)});
  online.merge_online(kFs, std::vector{rec("c1", 10, 20, 1.0), rec("c2", 5, 20, 2.0), rec("c4", 10, 20, 4.0)});
  ConsistencyReport report = check_consistency(offline, online, kFs, 100, std::nullopt);
  EXPECT_EQ(report.keys_checked, 4u);
  ASSERT_EQ(report.divergences.size(), 3u);  // stale c2, missing c3, extra c4
  EXPECT_EQ(report.divergences[0].online->event_ts, 5);
  EXPECT_FALSE(report.divergences[1].online.has_value());
  EXPECT_FALSE(report.divergences[2].offline.has_value());
  Json j = report.to_json();
  EXPECT_EQ(j["consistent"], false);
  EXPECT_EQ(j["divergences"][1]["key"], "c3");
  EXPECT_EQ(j["divergences"][1]["online"], nullptr);
}

TEST(ConsistencyTest, ExpiredOnBothSidesAgrees) {
  OfflineStore offline;
  OnlineStore online;
  std::vector<FeatureRecord> rs{rec("c1", 10, 20, 1.0)};
  offline.merge_offline(kFs, rs);
  online.merge_online(kFs, rs, 100);
  EXPECT_TRUE(check_consistency(offline, online, kFs, 119, 100).consistent());
  EXPECT_TRUE(check_consistency(offline, online, kFs, 120, 100).consistent());
  // online dropped the record while offline still considers it live
  OnlineStore empty;
  EXPECT_FALSE(check_consistency(offline, empty, kFs, 119, 100).consistent());
  EXPECT_TRUE(check_consistency(offline, empty, kFs, 120, 100).consistent());
}

TEST(ConsistencyTest, RandomMaterializationRunsStayConsistent) {
  testing::Rng rng(21);
  for (int round = 0; round < 50; ++round) {
    OfflineStore offline;
    OnlineStore online;
    std::optional<Duration> ttl;
    if (testing::chance(rng, 0.5)) ttl = testing::uniform(rng, 1, 200);
    Timestamp now = 0;
    for (int job = 0; job < 5; ++job) {
      now += testing::uniform(rng, 1, 100);
      std::vector<FeatureRecord> batch;
      for (int i = 0, n = static_cast<int>(testing::uniform(rng, 1, 6)); i < n; ++i) {
        batch.push_back(rec("c" + std::to_string(testing::uniform(rng, 0, 3)), testing::uniform(rng, 0, now - 1), now,
                            static_cast<double>(i)));
      }
      std::sort(batch.begin(), batch.end(), record_key_less);
      batch.erase(std::unique(batch.begin(), batch.end(), same_record_key), batch.end());
      offline.merge_offline(kFs, batch);
      online.merge_online(kFs, batch, ttl);
      Timestamp probe = now + testing::uniform(rng, 0, 300);
      auto report = check_consistency(offline, online, kFs, probe, ttl);
      EXPECT_TRUE(report.consistent()) << report.to_json().dump();
    }
  }
}

TEST(ConsistencyTest, FeatureStoreUsesCurrentTtl) {
  testing::TempDir dir;
  ManualClock clock(0);
  FeatureStore store(std::nullopt, clock);
  testing::register_synthetic(store, dir / "src", testing::policy(true, true, 100, 1000));
  clock.set(500);
  store.scheduler().run_job(store.scheduler().request_backfill(kFs, {0, 300}));
  EXPECT_TRUE(store.check_consistency(kFs, 600).consistent());
  EXPECT_TRUE(store.check_consistency(kFs, 1500).consistent());
  EXPECT_EQ(store.check_consistency(kFs, 1500).keys_checked, 2u);
}

}  // namespace
}  // namespace fstore
