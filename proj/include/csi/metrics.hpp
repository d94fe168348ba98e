#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csi/model.hpp"

namespace csi {

/// Mean absolute difference over all ordered pairs divided by twice the
/// mean: Σ_i Σ_j |x_i − x_j| / (2 n² μ). 0 for empty or all-zero input.
double gini(std::span<const std::size_t> counts);

struct ParticipantActivity {
  ParticipantId participant;
  std::string display_name;
  std::optional<SubgroupId> subgroup;
  std::size_t messages = 0;

  friend bool operator==(const ParticipantActivity&, const ParticipantActivity&) = default;
};

struct ParticipationMetrics {
  std::vector<ParticipantActivity> per_participant;  // participant-id order
  std::size_t spread = 0;                             // max − min message count
  double gini = 0.0;

  friend bool operator==(const ParticipationMetrics&, const ParticipationMetrics&) = default;
};

/// Human message counts for every participant who joined, including silent ones.
ParticipationMetrics participation_metrics(std::span<const SessionEvent> log);

struct PropagationRecord {
  InsightId insight_id;
  SubgroupId source;
  Millis created_at{0};
  std::size_t eligible_receivers = 0;                      // subgroups − 1 at log end
  std::vector<std::pair<SubgroupId, Millis>> deliveries;  // in log order

  std::size_t coverage() const { return deliveries.size(); }
  /// Creation to k-th delivery (1-based); none if fewer than k deliveries.
  std::optional<Millis> latency_to(std::size_t k) const;
  /// Creation to the delivery that reached the last eligible subgroup.
  std::optional<Millis> time_to_full_coverage() const;

  friend bool operator==(const PropagationRecord&, const PropagationRecord&) = default;
};

/// One record per insight_created event, in creation order.
std::vector<PropagationRecord> propagation_metrics(std::span<const SessionEvent> log);

/// Subgroups that exist by the end of the log (started plus late-opened).
std::vector<SubgroupId> subgroups_in_log(std::span<const SessionEvent> log);

}  // namespace csi
