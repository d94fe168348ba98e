#include "csi/partitioner.hpp"

#include <algorithm>

#include "csi/rng.hpp"

namespace csi {

std::size_t subgroup_count(std::size_t n, int target_size) {
  if (n < static_cast<std::size_t>(kMinSubgroupSize)) throw RosterTooSmall();
  const auto target = static_cast<std::size_t>(target_size);
  std::size_t k = std::max<std::size_t>(1, (2 * n + target) / (2 * target));
  const std::size_t k_min = (n + kMaxSubgroupSize - 1) / kMaxSubgroupSize;
  const std::size_t k_max = n / kMinSubgroupSize;
  // k_min <= k_max holds for every n >= 4.
  return std::clamp(k, k_min, k_max);
}

PartitionPlan partition(std::span<const ParticipantId> roster, int target_size,
                        std::uint64_t seed) {
  if (target_size < kMinSubgroupSize || target_size > kMaxSubgroupSize)
    throw std::invalid_argument("target subgroup size must be in [4,7]");
  const std::size_t n = roster.size();
  const std::size_t k = subgroup_count(n, target_size);

  std::vector<ParticipantId> order(roster.begin(), roster.end());
  Rng rng(seed);
  rng.shuffle(std::span<ParticipantId>(order));

  PartitionPlan plan;
  plan.target_size = target_size;
  plan.subgroups.resize(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t next = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    plan.subgroups[g].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                             order.begin() + static_cast<std::ptrdiff_t>(next + size));
    next += size;
  }
  return plan;
}

LateJoinAllocator::Admission LateJoinAllocator::admit(const ParticipantId& participant,
                                                      std::span<const Subgroup> subgroups,
                                                      const SubgroupId& next_subgroup_id) {
  const Subgroup* smallest = nullptr;
  for (const auto& g : subgroups) {
    if (smallest == nullptr || g.members.size() < smallest->members.size() ||
        (g.members.size() == smallest->members.size() && g.id < smallest->id))
      smallest = &g;
  }
  if (smallest != nullptr && smallest->members.size() < static_cast<std::size_t>(kMaxSubgroupSize))
    return Admission{smallest->id, {}};

  queue_.push_back(participant);
  if (queue_.size() < static_cast<std::size_t>(kMinSubgroupSize)) return Admission{};
  Admission opened{next_subgroup_id, {queue_.begin(), queue_.end()}};
  queue_.clear();
  return opened;
}

}  // namespace csi
