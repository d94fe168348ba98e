#include "csi/matchmaker.hpp"

#include <algorithm>
#include <string>

namespace csi {

bool InsightPool::is_near_duplicate(const TokenSet& tokens, const SubgroupId& source) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const PooledInsight& e) {
    return e.insight.source_subgroup == source && novelty(tokens, e.tokens) < dedup_floor_;
  });
}

InsightPool::EnqueueResult InsightPool::enqueue(Insight insight) {
  TokenSet tokens(tokenize(insight.text));
  if (is_near_duplicate(tokens, insight.source_subgroup)) return {};
  EnqueueResult result{true, std::nullopt};
  entries_.push_back(PooledInsight{std::move(insight), std::move(tokens)});
  if (entries_.size() > max_size_) {
    result.evicted = entries_.front().insight.id;
    entries_.pop_front();
  }
  return result;
}

void InsightPool::remove(const InsightId& id) {
  std::erase_if(entries_, [&](const PooledInsight& e) { return e.insight.id == id; });
}

const PooledInsight* InsightPool::find(const InsightId& id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const PooledInsight& e) { return e.insight.id == id; });
  return it == entries_.end() ? nullptr : &*it;
}

PooledInsight* InsightPool::find(const InsightId& id) {
  return const_cast<PooledInsight*>(std::as_const(*this).find(id));
}

MatchmakerConfig MatchmakerConfig::from(const SessionConfig& config, RoutingTopology topology) {
  MatchmakerConfig out;
  out.starvation_threshold = config.starvation_threshold;
  out.novelty_floor = config.novelty_floor;
  out.profile_window = config.profile_window;
  out.dedup_floor = config.dedup_floor;
  out.pool_max_size = config.pool_max_size;
  out.topology = topology;
  return out;
}

Matchmaker::Matchmaker(MatchmakerConfig config, std::shared_ptr<const NoveltyScorer> scorer)
    : config_(config),
      scorer_(scorer ? std::move(scorer) : std::make_shared<JaccardNovelty>()),
      pool_(config.pool_max_size, config.dedup_floor) {}

void Matchmaker::add_subgroup(const SubgroupId& id, Millis now) {
  auto [it, inserted] = routing_.try_emplace(id);
  if (!inserted) throw ContractViolation("subgroup registered twice: " + id.value);
  it->second.last_delivery_at = now;
  it->second.profile = ContentProfile(config_.profile_window);
}

void Matchmaker::observe(const SubgroupId& id, const Tokens& message_tokens) {
  auto it = routing_.find(id);
  if (it == routing_.end()) throw ContractViolation("unknown subgroup: " + id.value);
  it->second.profile.add(message_tokens);
}

InsightPool::EnqueueResult Matchmaker::enqueue(Insight insight) {
  if (!routing_.contains(insight.source_subgroup))
    throw ContractViolation("insight from unknown subgroup: " + insight.source_subgroup.value);
  return pool_.enqueue(std::move(insight));
}

const RoutingState& Matchmaker::routing(const SubgroupId& id) const {
  auto it = routing_.find(id);
  if (it == routing_.end()) throw ContractViolation("unknown subgroup: " + id.value);
  return it->second;
}

bool Matchmaker::eligible(const SubgroupId& id, Millis now) const {
  return now - routing(id).last_delivery_at >= config_.starvation_threshold;
}

std::vector<SubgroupId> Matchmaker::ring_neighbours(const SubgroupId& id) const {
  std::vector<SubgroupId> out;
  if (routing_.size() < 2) return out;
  auto it = routing_.find(id);
  if (it == routing_.end()) return out;
  auto next = std::next(it) == routing_.end() ? routing_.begin() : std::next(it);
  auto prev = it == routing_.begin() ? std::prev(routing_.end()) : std::prev(it);
  out.push_back(next->first);
  if (prev->first != next->first) out.push_back(prev->first);
  return out;
}

bool Matchmaker::routable(const PooledInsight& candidate, const SubgroupId& receiver) const {
  const Insight& insight = candidate.insight;
  if (insight.source_subgroup == receiver) return false;
  if (insight.delivered_to.contains(receiver)) return false;
  if (routing(receiver).received_insight_ids.contains(insight.id)) return false;
  if (config_.topology == RoutingTopology::fully_connected) return true;
  // Ring: the insight travels one hop at a time from any subgroup holding it.
  for (const auto& neighbour : ring_neighbours(receiver)) {
    if (neighbour == insight.source_subgroup || insight.delivered_to.contains(neighbour))
      return true;
  }
  return false;
}

double Matchmaker::score(const PooledInsight& candidate, const SubgroupId& receiver) const {
  return scorer_->score(candidate.insight.text, candidate.tokens, routing(receiver).profile);
}

std::optional<Insight> Matchmaker::select_delivery(const SubgroupId& receiver, Millis now) const {
  if (!eligible(receiver, now))
    throw ContractViolation("select_delivery on ineligible subgroup " + receiver.value);
  const PooledInsight* best = nullptr;
  double best_score = 0.0;
  for (const auto& candidate : pool_.entries()) {
    if (!routable(candidate, receiver)) continue;
    const double s = score(candidate, receiver);
    if (s < config_.novelty_floor) continue;
    const bool better =
        best == nullptr || s > best_score ||
        (s == best_score &&
         (candidate.insight.created_at < best->insight.created_at ||
          (candidate.insight.created_at == best->insight.created_at &&
           candidate.insight.id < best->insight.id)));
    if (better) {
      best = &candidate;
      best_score = s;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->insight;
}

std::vector<Delivery> Matchmaker::plan_tick(Millis now) const {
  std::vector<std::pair<Millis, SubgroupId>> order;
  order.reserve(routing_.size());
  for (const auto& [id, state] : routing_) order.emplace_back(state.last_delivery_at, id);
  std::sort(order.begin(), order.end());

  std::vector<Delivery> deliveries;
  for (const auto& [last, id] : order) {
    if (!eligible(id, now)) continue;
    if (auto chosen = select_delivery(id, now)) deliveries.push_back({id, chosen->id});
  }
  return deliveries;
}

bool Matchmaker::fully_delivered(const Insight& insight) const {
  std::size_t others = routing_.size() - (routing_.contains(insight.source_subgroup) ? 1 : 0);
  return insight.delivered_to.size() >= others;
}

void Matchmaker::record_delivery(const Delivery& delivery, Millis now) {
  PooledInsight* entry = pool_.find(delivery.insight_id);
  if (entry == nullptr)
    throw ContractViolation("delivery of insight not in pool: " + delivery.insight_id.value);
  if (!routable(*entry, delivery.receiver))
    throw ContractViolation("delivery violates routing rules: " + delivery.insight_id.value +
                            " -> " + delivery.receiver.value);
  auto& state = routing_.at(delivery.receiver);
  state.last_delivery_at = std::max(state.last_delivery_at, now);
  state.received_insight_ids.insert(delivery.insight_id);
  entry->insight.delivered_to.insert(delivery.receiver);
  if (fully_delivered(entry->insight)) pool_.remove(delivery.insight_id);
}

void Matchmaker::purge_fully_delivered() {
  std::vector<InsightId> done;
  for (const auto& e : pool_.entries())
    if (fully_delivered(e.insight)) done.push_back(e.insight.id);
  for (const auto& id : done) pool_.remove(id);
}

std::vector<Delivery> Matchmaker::tick(Millis now) {
  purge_fully_delivered();
  auto deliveries = plan_tick(now);
  for (const auto& d : deliveries) record_delivery(d, now);
  return deliveries;
}

}  // namespace csi
