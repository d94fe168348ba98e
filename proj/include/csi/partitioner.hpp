#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "csi/model.hpp"

namespace csi {

inline constexpr int kMinSubgroupSize = 4;
inline constexpr int kMaxSubgroupSize = 7;

class RosterTooSmall : public std::runtime_error {
 public:
  RosterTooSmall() : std::runtime_error("roster too small for swarm mode") {}
};

struct PartitionPlan {
  std::vector<std::vector<ParticipantId>> subgroups;
  int target_size = 0;
};

/// Number of subgroups for n people: round(n / target), then moved the
/// minimal distance into [ceil(n/7), floor(n/4)] so every size lands in [4,7].
std::size_t subgroup_count(std::size_t n, int target_size);

/// Seeded shuffle, then sizes that differ by at most one (larger groups
/// first). Throws RosterTooSmall for n < 4 and std::invalid_argument for a
/// target outside [4,7].
PartitionPlan partition(std::span<const ParticipantId> roster, int target_size,
                        std::uint64_t seed);

/// Late joins while a csi session is running. A joiner goes to the smallest
/// subgroup (lowest id on ties) if it stays within 7; otherwise joiners queue
/// until four are waiting, and those four open a new subgroup.
class LateJoinAllocator {
 public:
  struct Admission {
    std::optional<SubgroupId> subgroup;           // none while queued
    std::vector<ParticipantId> opened_with;       // members of a newly opened subgroup
  };

  Admission admit(const ParticipantId& participant, std::span<const Subgroup> subgroups,
                  const SubgroupId& next_subgroup_id);

  const std::deque<ParticipantId>& queue() const { return queue_; }

  friend bool operator==(const LateJoinAllocator&, const LateJoinAllocator&) = default;

 private:
  std::deque<ParticipantId> queue_;
};

}  // namespace csi
