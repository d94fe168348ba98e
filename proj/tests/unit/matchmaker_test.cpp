#include <gtest/gtest.h>

#include "csi/matchmaker.hpp"
#include "routing_oracle.hpp"

using namespace csi;

namespace {

Insight make_insight(const std::string& id, const std::string& source, const std::string& text,
                     long long at = 0) {
  Insight in;
  in.id = InsightId(id);
  in.source_subgroup = SubgroupId(source);
  in.text = text;
  in.created_at = Millis{at};
  return in;
}

Matchmaker three_groups(RoutingTopology topology = RoutingTopology::fully_connected) {
  MatchmakerConfig cfg;
  cfg.starvation_threshold = Millis{45'000};
  cfg.topology = topology;
  Matchmaker mm(cfg);
  for (const char* g : {"g-001", "g-002", "g-003"}) mm.add_subgroup(SubgroupId(g), Millis{0});
  return mm;
}

}  // namespace

TEST(InsightPool, RejectsNearDuplicatesFromSameSource) {
  InsightPool pool(64, 0.2);
  EXPECT_TRUE(pool.enqueue(make_insight("i-1", "g-001", "paint cones as lamps")).admitted);
  EXPECT_FALSE(pool.enqueue(make_insight("i-2", "g-001", "paint the cones as lamps")).admitted);
  EXPECT_TRUE(pool.enqueue(make_insight("i-3", "g-002", "paint cones as lamps")).admitted);
  EXPECT_EQ(pool.size(), 2u);
}

TEST(InsightPool, EvictsOldestPastCapacity) {
  InsightPool pool(2, 0.2);
  pool.enqueue(make_insight("i-1", "g-001", "alpha"));
  pool.enqueue(make_insight("i-2", "g-001", "beta"));
  const auto r = pool.enqueue(make_insight("i-3", "g-001", "gamma"));
  EXPECT_TRUE(r.admitted);
  EXPECT_EQ(r.evicted, InsightId("i-1"));
  EXPECT_EQ(pool.entries().front().insight.id, InsightId("i-2"));
}

TEST(Matchmaker, EligibilityFollowsStarvationThreshold) {
  auto mm = three_groups();
  EXPECT_FALSE(mm.eligible(SubgroupId("g-001"), Millis{44'999}));
  EXPECT_TRUE(mm.eligible(SubgroupId("g-001"), Millis{45'000}));
  EXPECT_THROW(mm.select_delivery(SubgroupId("g-001"), Millis{1}), ContractViolation);
}

TEST(Matchmaker, NeverDeliversToSourceOrTwice) {
  auto mm = three_groups();
  mm.enqueue(make_insight("i-1", "g-001", "cones as planters"));
  EXPECT_FALSE(mm.select_delivery(SubgroupId("g-001"), Millis{50'000}));
  const auto d = mm.tick(Millis{50'000});
  ASSERT_EQ(d.size(), 2u);
  for (const auto& x : d) EXPECT_NE(x.receiver, SubgroupId("g-001"));
  // Fully delivered insights leave the pool.
  EXPECT_EQ(mm.pool().size(), 0u);
  EXPECT_THROW(mm.record_delivery({SubgroupId("g-002"), InsightId("i-1")}, Millis{1}),
               ContractViolation);
}

TEST(Matchmaker, PicksMostNovelAboveFloor) {
  auto mm = three_groups();
  mm.observe(SubgroupId("g-002"), tokenize("cones planters garden"));
  mm.enqueue(make_insight("i-1", "g-001", "cones planters garden"));  // novelty 0
  mm.enqueue(make_insight("i-2", "g-001", "cones hats"));             // 0.75
  mm.enqueue(make_insight("i-3", "g-003", "drum kit"));               // 1
  const auto pick = mm.select_delivery(SubgroupId("g-002"), Millis{45'000});
  ASSERT_TRUE(pick);
  EXPECT_EQ(pick->id, InsightId("i-3"));
}

TEST(Matchmaker, TieGoesToOlderInsight) {
  auto mm = three_groups();
  mm.enqueue(make_insight("i-2", "g-001", "hats", 5));
  mm.enqueue(make_insight("i-1", "g-001", "drums", 9));
  mm.enqueue(make_insight("i-3", "g-003", "kites", 5));
  const auto pick = mm.select_delivery(SubgroupId("g-002"), Millis{45'000});
  ASSERT_TRUE(pick);
  EXPECT_EQ(pick->id, InsightId("i-2"));
}

TEST(Matchmaker, BelowFloorMeansNoDelivery) {
  auto mm = three_groups();
  mm.observe(SubgroupId("g-002"), tokenize("cones planters garden soil"));
  mm.enqueue(make_insight("i-1", "g-001", "cones planters garden"));
  EXPECT_FALSE(mm.select_delivery(SubgroupId("g-002"), Millis{45'000}));
}

TEST(Matchmaker, PlanOrdersMostStarvedFirst) {
  auto mm = three_groups();
  mm.enqueue(make_insight("i-1", "g-001", "hats"));
  mm.tick(Millis{45'000});  // g-002, g-003 served
  mm.enqueue(make_insight("i-2", "g-002", "drums"));
  const auto plan = mm.plan_tick(Millis{90'000});
  ASSERT_FALSE(plan.empty());
  EXPECT_EQ(plan.front().receiver, SubgroupId("g-001"));
}

TEST(Matchmaker, RingDeliversOneHopAtATime) {
  MatchmakerConfig cfg;
  cfg.starvation_threshold = Millis{0};
  cfg.topology = RoutingTopology::ring;
  Matchmaker mm(cfg);
  for (int g = 1; g <= 6; ++g) mm.add_subgroup(SubgroupId(sequential_id("g", g, 3)), Millis{0});
  EXPECT_EQ(mm.ring_neighbours(SubgroupId("g-001")),
            (std::vector<SubgroupId>{SubgroupId("g-002"), SubgroupId("g-006")}));
  mm.enqueue(make_insight("i-1", "g-001", "hats"));
  auto d = mm.tick(Millis{1});
  std::set<SubgroupId> got;
  for (const auto& x : d) got.insert(x.receiver);
  EXPECT_EQ(got, (std::set<SubgroupId>{SubgroupId("g-002"), SubgroupId("g-006")}));
  d = mm.tick(Millis{2});
  got.clear();
  for (const auto& x : d) got.insert(x.receiver);
  EXPECT_EQ(got, (std::set<SubgroupId>{SubgroupId("g-003"), SubgroupId("g-005")}));
  d = mm.tick(Millis{3});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].receiver, SubgroupId("g-004"));
}

TEST(Matchmaker, AgreesWithBruteForceOracle) {
  const auto r = oracle::run_argmax_oracle(1000, 2024);
  EXPECT_EQ(r.instances, 1000u);
  EXPECT_GT(r.non_empty, r.comparisons / 4);
  EXPECT_EQ(r.mismatches, 0u) << r.first_mismatch;
}
