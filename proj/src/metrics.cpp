#include "csi/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace csi {

double gini(std::span<const std::size_t> counts) {
  if (counts.empty()) return 0.0;
  std::vector<double> x(counts.begin(), counts.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x) total += v;
  if (total == 0.0) return 0.0;
  // Sorted form of the pairwise sum: Σ_i Σ_j |x_i − x_j| = 2 Σ_i (2i − n + 1) x_i.
  double weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    weighted += (2.0 * static_cast<double>(i) - n + 1.0) * x[i];
  return weighted / (n * total);
}

ParticipationMetrics participation_metrics(std::span<const SessionEvent> log) {
  std::map<ParticipantId, ParticipantActivity> people;
  std::set<SubgroupId> known;
  std::vector<ParticipantId> queued;  // late joiners waiting for a new subgroup
  bool running = false;
  for (const auto& event : log) {
    if (const auto* started = std::get_if<SessionStarted>(&event.payload)) {
      running = true;
      for (const auto& g : started->subgroups) {
        known.insert(g.id);
        for (const auto& member : g.members) people[member].subgroup = g.id;
      }
    } else if (const auto* joined = std::get_if<ParticipantJoined>(&event.payload)) {
      const Participant& joiner = joined->participant;
      auto& p = people[joiner.id];
      p.display_name = joiner.display_name;
      if (joiner.subgroup) {
        p.subgroup = joiner.subgroup;
        if (known.insert(*joiner.subgroup).second) {
          for (const auto& q : queued) people[q].subgroup = joiner.subgroup;
          queued.clear();
        }
      } else if (running) {
        queued.push_back(joiner.id);
      }
    } else if (const auto* posted = std::get_if<MessagePosted>(&event.payload)) {
      if (posted->message.is_human())
        ++people[std::get<ParticipantId>(posted->message.author)].messages;
    }
  }
  ParticipationMetrics out;
  std::vector<std::size_t> counts;
  for (auto& [id, activity] : people) {
    activity.participant = id;
    counts.push_back(activity.messages);
    out.per_participant.push_back(std::move(activity));
  }
  if (!counts.empty()) {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    out.spread = *hi - *lo;
  }
  out.gini = gini(counts);
  return out;
}

std::vector<SubgroupId> subgroups_in_log(std::span<const SessionEvent> log) {
  std::set<SubgroupId> ids;
  for (const auto& event : log) {
    if (const auto* started = std::get_if<SessionStarted>(&event.payload)) {
      for (const auto& g : started->subgroups) ids.insert(g.id);
    } else if (const auto* joined = std::get_if<ParticipantJoined>(&event.payload)) {
      if (joined->participant.subgroup) ids.insert(*joined->participant.subgroup);
    }
  }
  return {ids.begin(), ids.end()};
}

std::optional<Millis> PropagationRecord::latency_to(std::size_t k) const {
  if (k == 0 || k > deliveries.size()) return std::nullopt;
  return deliveries[k - 1].second - created_at;
}

std::optional<Millis> PropagationRecord::time_to_full_coverage() const {
  if (eligible_receivers == 0 || deliveries.size() < eligible_receivers) return std::nullopt;
  return latency_to(eligible_receivers);
}

std::vector<PropagationRecord> propagation_metrics(std::span<const SessionEvent> log) {
  std::vector<PropagationRecord> records;
  std::map<InsightId, std::size_t> index;
  for (const auto& event : log) {
    if (const auto* created = std::get_if<InsightCreated>(&event.payload)) {
      index[created->insight.id] = records.size();
      records.push_back({created->insight.id, created->insight.source_subgroup,
                         created->insight.created_at, 0, {}});
    } else if (const auto* delivered = std::get_if<InsightDelivered>(&event.payload)) {
      auto it = index.find(delivered->insight_id);
      if (it == index.end()) continue;
      records[it->second].deliveries.emplace_back(delivered->receiver, event.wall_time);
    }
  }
  const std::size_t groups = subgroups_in_log(log).size();
  for (auto& r : records) r.eligible_receivers = groups == 0 ? 0 : groups - 1;
  return records;
}

}  // namespace csi
