#include <gtest/gtest.h>

#include <set>

#include "csi/partitioner.hpp"

using namespace csi;

namespace {

std::vector<ParticipantId> roster(std::size_t n) {
  std::vector<ParticipantId> out;
  for (std::size_t i = 1; i <= n; ++i) out.emplace_back(sequential_id("p", i, 4));
  return out;
}

}  // namespace

TEST(Partition, SeventyFiveByFive) {
  const auto r = roster(75);
  const auto plan = partition(r, 5, 42);
  ASSERT_EQ(plan.subgroups.size(), 15u);
  for (const auto& g : plan.subgroups) EXPECT_EQ(g.size(), 5u);
}

TEST(Partition, NinetyEightBySeven) {
  const auto r = roster(98);
  const auto plan = partition(r, 7, 42);
  ASSERT_EQ(plan.subgroups.size(), 14u);
  for (const auto& g : plan.subgroups) EXPECT_EQ(g.size(), 7u);
}

TEST(Partition, SizesInRangeAndBalancedForEveryRoster) {
  for (int target = 4; target <= 7; ++target) {
    for (std::size_t n = 8; n <= 1000; ++n) {
      const auto r = roster(n);
      const auto plan = partition(r, target, n);
      std::size_t lo = SIZE_MAX, hi = 0, total = 0;
      std::set<ParticipantId> seen;
      for (const auto& g : plan.subgroups) {
        lo = std::min(lo, g.size());
        hi = std::max(hi, g.size());
        total += g.size();
        seen.insert(g.begin(), g.end());
      }
      ASSERT_GE(lo, 4u) << "n=" << n << " target=" << target;
      ASSERT_LE(hi, 7u) << "n=" << n << " target=" << target;
      ASSERT_LE(hi - lo, 1u) << "n=" << n;
      ASSERT_EQ(total, n);
      ASSERT_EQ(seen.size(), n);
    }
  }
}

TEST(Partition, SmallRosters) {
  EXPECT_THROW(partition(roster(3), 5, 1), RosterTooSmall);
  EXPECT_EQ(partition(roster(4), 5, 1).subgroups.size(), 1u);
  EXPECT_EQ(partition(roster(7), 5, 1).subgroups.size(), 1u);
  EXPECT_EQ(partition(roster(8), 5, 1).subgroups.size(), 2u);
  EXPECT_THROW(partition(roster(10), 3, 1), std::invalid_argument);
  EXPECT_THROW(partition(roster(10), 8, 1), std::invalid_argument);
}

TEST(Partition, SeedDeterminesShuffle) {
  const auto r = roster(40);
  EXPECT_EQ(partition(r, 5, 9).subgroups, partition(r, 5, 9).subgroups);
  EXPECT_NE(partition(r, 5, 9).subgroups, partition(r, 5, 10).subgroups);
}

TEST(LateJoin, FillsSmallestThenQueuesFour) {
  std::vector<Subgroup> groups(2);
  groups[0].id = SubgroupId("g-001");
  groups[1].id = SubgroupId("g-002");
  for (int i = 0; i < 6; ++i) groups[0].members.insert(ParticipantId(sequential_id("a", i, 2)));
  for (int i = 0; i < 5; ++i) groups[1].members.insert(ParticipantId(sequential_id("b", i, 2)));

  LateJoinAllocator alloc;
  const SubgroupId next("g-003");
  auto a = alloc.admit(ParticipantId("x1"), groups, next);
  EXPECT_EQ(a.subgroup, SubgroupId("g-002"));
  groups[1].members.insert(ParticipantId("x1"));
  a = alloc.admit(ParticipantId("x2"), groups, next);
  EXPECT_EQ(a.subgroup, SubgroupId("g-001"));  // tie at 6, lower id
  groups[0].members.insert(ParticipantId("x2"));
  a = alloc.admit(ParticipantId("x3"), groups, next);
  EXPECT_EQ(a.subgroup, SubgroupId("g-002"));
  groups[1].members.insert(ParticipantId("x3"));

  for (int i = 0; i < 3; ++i) {
    a = alloc.admit(ParticipantId(sequential_id("q", i, 1)), groups, next);
    EXPECT_FALSE(a.subgroup.has_value());
    EXPECT_EQ(alloc.queue().size(), static_cast<std::size_t>(i + 1));
  }
  a = alloc.admit(ParticipantId("q3"), groups, next);
  EXPECT_EQ(a.subgroup, next);
  EXPECT_EQ(a.opened_with.size(), 4u);
  EXPECT_TRUE(alloc.queue().empty());
}
