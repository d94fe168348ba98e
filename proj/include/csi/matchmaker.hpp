#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "csi/model.hpp"
#include "csi/text.hpp"

namespace csi {

/// Per-subgroup routing bookkeeping.
struct RoutingState {
  Millis last_delivery_at{0};
  ContentProfile profile;
  std::set<InsightId> received_insight_ids;

  friend bool operator==(const RoutingState&, const RoutingState&) = default;
};

struct PooledInsight {
  Insight insight;
  TokenSet tokens;

  friend bool operator==(const PooledInsight&, const PooledInsight&) = default;
};

/// Insights that still have somewhere to go, oldest first.
class InsightPool {
 public:
  explicit InsightPool(std::size_t max_size = 64, double dedup_floor = 0.2)
      : max_size_(max_size), dedup_floor_(dedup_floor) {}

  struct EnqueueResult {
    bool admitted = false;
    std::optional<InsightId> evicted;
  };

  /// Another entry from the same source with novelty < dedup_floor.
  bool is_near_duplicate(const TokenSet& tokens, const SubgroupId& source) const;

  /// Rejects near-duplicates; evicts the oldest entry past max_size.
  EnqueueResult enqueue(Insight insight);

  void remove(const InsightId& id);
  const PooledInsight* find(const InsightId& id) const;
  PooledInsight* find(const InsightId& id);

  const std::deque<PooledInsight>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t max_size() const { return max_size_; }

  friend bool operator==(const InsightPool&, const InsightPool&) = default;

 private:
  std::size_t max_size_;
  double dedup_floor_;
  std::deque<PooledInsight> entries_;
};

struct MatchmakerConfig {
  Millis starvation_threshold{45'000};
  double novelty_floor = 0.3;
  std::size_t profile_window = 30;
  double dedup_floor = 0.2;
  std::size_t pool_max_size = 64;
  RoutingTopology topology = RoutingTopology::fully_connected;

  static MatchmakerConfig from(const SessionConfig& config, RoutingTopology topology);
};

struct Delivery {
  SubgroupId receiver;
  InsightId insight_id;

  friend bool operator==(const Delivery&, const Delivery&) = default;
};

/// Insight router. Tracks which subgroups are starving for input and hands
/// each the pooled insight that is most novel against its recent talk.
///
/// All mutation goes through add_subgroup / observe / enqueue /
/// record_delivery, so a session can rebuild the exact state from its log.
class Matchmaker {
 public:
  explicit Matchmaker(MatchmakerConfig config = {},
                      std::shared_ptr<const NoveltyScorer> scorer = nullptr);

  void add_subgroup(const SubgroupId& id, Millis now);
  void observe(const SubgroupId& id, const Tokens& message_tokens);
  InsightPool::EnqueueResult enqueue(Insight insight);

  /// now − last_delivery_at ≥ starvation_threshold.
  bool eligible(const SubgroupId& id, Millis now) const;

  /// Routing rules independent of scoring: not the source, not already
  /// received, and reachable under the topology.
  bool routable(const PooledInsight& candidate, const SubgroupId& receiver) const;

  double score(const PooledInsight& candidate, const SubgroupId& receiver) const;

  /// Most novel routable candidate at or above the novelty floor; ties go to
  /// the older insight, then the smaller id. Throws ContractViolation when the
  /// subgroup is not eligible.
  std::optional<Insight> select_delivery(const SubgroupId& receiver, Millis now) const;

  /// Deliveries for one tick, most-starved subgroup first, computed against
  /// the state at the start of the tick. One insight may go to many receivers.
  std::vector<Delivery> plan_tick(Millis now) const;

  void record_delivery(const Delivery& delivery, Millis now);

  /// plan_tick + record_delivery for each planned delivery.
  std::vector<Delivery> tick(Millis now);

  /// Drops insights that have already reached every other subgroup.
  void purge_fully_delivered();

  const MatchmakerConfig& config() const { return config_; }
  const InsightPool& pool() const { return pool_; }
  const std::map<SubgroupId, RoutingState>& routing_states() const { return routing_; }
  const RoutingState& routing(const SubgroupId& id) const;

  /// Ring neighbours in subgroup-id order (empty for fewer than 2 subgroups).
  std::vector<SubgroupId> ring_neighbours(const SubgroupId& id) const;

 private:
  bool fully_delivered(const Insight& insight) const;

  MatchmakerConfig config_;
  std::shared_ptr<const NoveltyScorer> scorer_;
  InsightPool pool_;
  std::map<SubgroupId, RoutingState> routing_;
};

}  // namespace csi
