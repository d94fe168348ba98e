#include "csi/simharness.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "csi/data.hpp"
#include "csi/rng.hpp"
#include "csi/session.hpp"
#include "csi/surrogate.hpp"
#include "csi/text.hpp"

namespace csi {

namespace {

using TokenBag = std::set<std::string>;

// The harness keeps its own view of every subgroup, built from the event
// stream alone, so the starvation check does not trust matchmaker internals.
struct GroupView {
  Millis last_delivery{0};
  std::deque<TokenBag> recent;
  std::set<InsightId> received;
  bool qualified_throughout = true;
};

double oracle_novelty(const TokenBag& insight, const std::deque<TokenBag>& recent) {
  TokenBag profile;
  for (const auto& bag : recent) profile.insert(bag.begin(), bag.end());
  if (insight.empty() && profile.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : insight) common += profile.count(t);
  const std::size_t uni = insight.size() + profile.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

// Template wording, so echoes pick up the idea rather than the phrasing.
const TokenBag& template_vocabulary() {
  static const TokenBag vocab = [] {
    TokenBag v;
    for (const auto& line : data::lines("aut_templates"))
      for (auto& t : tokenize(line)) v.insert(std::move(t));
    return v;
  }();
  return vocab;
}

/// "yes, " plus the first two idea words of the relayed text.
std::string echo_text(const std::string& relay_text) {
  const std::string body = strip_framing(relay_text).value_or(relay_text);
  std::vector<std::string> words;
  for (auto& t : tokenize(body))
    if (!template_vocabulary().contains(t)) words.push_back(std::move(t));
  if (words.size() < 2) return {};
  return "yes, " + words[0] + " " + words[1];
}

}  // namespace

ScenarioResult run_scenario(const SessionConfig& config, std::span<const BotScript> scripts,
                            std::uint64_t seed, const ScenarioOptions& options) {
  for (const auto& script : scripts) {
    for (std::size_t i = 1; i < script.schedule.size(); ++i)
      if (script.schedule[i].offset < script.schedule[i - 1].offset)
        throw ScriptError("schedule offsets of " + script.bot_id + " are not nondecreasing");
    if (script.reply.probability < 0.0 || script.reply.probability > 1.0)
      throw ScriptError("reply probability of " + script.bot_id + " outside [0,1]");
  }

  SessionConfig cfg = config;
  cfg.random_seed = seed;
  Session session(cfg, options.topology);
  ScenarioResult result;
  RoutingAudit& audit = result.audit;

  std::map<SubgroupId, GroupView> views;
  std::map<InsightId, SubgroupId> sources;
  std::map<InsightId, std::set<SubgroupId>> holders;
  const std::size_t window = cfg.profile_window;
  session.set_listener([&](const SessionEvent& e) {
    if (const auto* started = std::get_if<SessionStarted>(&e.payload)) {
      if (cfg.mode == SessionMode::csi)
        for (const auto& g : started->subgroups) views[g.id].last_delivery = e.wall_time;
    } else if (const auto* joined = std::get_if<ParticipantJoined>(&e.payload)) {
      const auto& sg = joined->participant.subgroup;
      if (sg && cfg.mode == SessionMode::csi && !views.contains(*sg))
        views[*sg].last_delivery = e.wall_time;
    } else if (const auto* posted = std::get_if<MessagePosted>(&e.payload)) {
      auto it = views.find(posted->message.subgroup);
      if (it == views.end()) return;
      const Tokens tokens = tokenize(posted->message.text);
      it->second.recent.emplace_back(tokens.begin(), tokens.end());
      if (it->second.recent.size() > window) it->second.recent.pop_front();
    } else if (const auto* created = std::get_if<InsightCreated>(&e.payload)) {
      sources[created->insight.id] = created->insight.source_subgroup;
    } else if (const auto* delivered = std::get_if<InsightDelivered>(&e.payload)) {
      ++audit.deliveries;
      if (sources[delivered->insight_id] == delivered->receiver) ++audit.self_deliveries;
      GroupView& view = views[delivered->receiver];
      if (!view.received.insert(delivered->insight_id).second) ++audit.duplicate_deliveries;
      holders[delivered->insight_id].insert(delivered->receiver);
      if (view.qualified_throughout)
        audit.longest_qualified_wait =
            std::max(audit.longest_qualified_wait, e.wall_time - view.last_delivery);
      view.last_delivery = e.wall_time;
      view.qualified_throughout = true;
    }
  });

  // Subgroups that are eligible and have a qualifying candidate, by brute force.
  std::set<SubgroupId> owed;
  auto qualifies = [&](const PooledInsight& candidate, const SubgroupId& receiver) {
    const Insight& insight = candidate.insight;
    const GroupView& view = views.at(receiver);
    if (insight.source_subgroup == receiver || view.received.contains(insight.id)) return false;
    if (options.topology == RoutingTopology::ring) {
      std::vector<SubgroupId> ring;
      for (const auto& [id, _] : views) ring.push_back(id);
      const auto at = std::find(ring.begin(), ring.end(), receiver) - ring.begin();
      const auto n = static_cast<std::ptrdiff_t>(ring.size());
      if (n < 2) return false;
      const SubgroupId& next = ring[static_cast<std::size_t>((at + 1) % n)];
      const SubgroupId& prev = ring[static_cast<std::size_t>((at + n - 1) % n)];
      auto holds = [&](const SubgroupId& g) {
        return g == insight.source_subgroup || holders[insight.id].contains(g);
      };
      if (!holds(next) && !holds(prev)) return false;
    }
    const Tokens tokens = tokenize(insight.text);
    return oracle_novelty(TokenBag(tokens.begin(), tokens.end()), view.recent) >=
           cfg.novelty_floor;
  };
  if (options.audit_starvation) {
    session.set_tick_observer([&](const Session& s, Millis now) {
      owed.clear();
      for (auto& [id, view] : views) {
        bool any = false;
        for (const auto& candidate : s.matchmaker().pool().entries())
          if (qualifies(candidate, id)) {
            any = true;
            break;
          }
        if (!any) {
          view.qualified_throughout = false;
          continue;
        }
        if (now - view.last_delivery >= cfg.starvation_threshold) owed.insert(id);
      }
    });
  }

  std::vector<ParticipantId> bots;
  std::map<ParticipantId, std::size_t> bot_index;
  for (const auto& script : scripts) {
    const auto joined = session.join(script.bot_id, Millis{0});
    bot_index[joined.participant.id] = bots.size();
    bots.push_back(joined.participant.id);
  }
  try {
    session.start(Millis{0});
  } catch (const SessionError& e) {
    throw ScriptError(std::string("cannot start scenario: ") + e.what());
  }

  // Pending posts keyed by (time, insertion order).
  std::map<std::pair<Millis, std::uint64_t>, std::pair<std::size_t, std::string>> pending;
  std::uint64_t order = 0;
  for (std::size_t b = 0; b < scripts.size(); ++b)
    for (const auto& m : scripts[b].schedule) pending[{m.offset, order++}] = {b, m.text};
  std::vector<Rng> reply_rngs;
  for (std::size_t b = 0; b < scripts.size(); ++b) reply_rngs.emplace_back(mix_seed(seed, b));

  auto record_receipt = [&](const Broadcast& b, const std::optional<ParticipantId>& author) {
    if (author) result.received[*author].push_back(b.message.id);
    for (const auto& r : b.recipients) result.received[r].push_back(b.message.id);
  };

  for (std::uint64_t k = 1; session.phase() == Phase::running; ++k) {
    const Millis tick_at = cfg.tick_interval * static_cast<long long>(k);
    while (!pending.empty() && pending.begin()->first.first <= tick_at) {
      const auto [key, item] = *pending.begin();
      pending.erase(pending.begin());
      if (key.first >= cfg.duration) continue;
      const ParticipantId& author = bots[item.first];
      const Broadcast b = session.post_message(author, item.second, key.first);
      record_receipt(b, author);
    }

    const TickOutcome out = session.scheduler_tick(tick_at);
    ++audit.ticks;
    std::set<SubgroupId> served;
    for (const auto& d : out.deliveries) served.insert(d.receiver);
    for (const auto& g : owed)
      if (!served.contains(g)) ++audit.starvation_violations;
    owed.clear();

    for (const auto& relay : out.relays) {
      record_receipt(relay, std::nullopt);
      for (const auto& r : relay.recipients) {
        const std::size_t b = bot_index.at(r);
        const ReplyPolicy& policy = scripts[b].reply;
        if (policy.kind != ReplyPolicy::Kind::echo_topic) continue;
        Rng& rng = reply_rngs[b];
        if (rng.uniform() >= policy.probability) continue;
        const auto span = static_cast<std::uint64_t>(
            (options.reply_delay_max - options.reply_delay_min).count() + 1);
        const Millis at = tick_at + options.reply_delay_min +
                          Millis{static_cast<long long>(rng.below(span))};
        std::string text = echo_text(relay.message.text);
        if (!text.empty()) pending[{at, order++}] = {b, std::move(text)};
      }
    }
  }

  result.log = session.events();
  result.propagation = propagation_metrics(result.log);
  result.participation = participation_metrics(result.log);

  // Per-subgroup order as seen by each member.
  std::map<SubgroupId, std::vector<MessageId>> order_by_group;
  std::map<MessageId, SubgroupId> group_of;
  for (const auto& e : result.log)
    if (const auto* posted = std::get_if<MessagePosted>(&e.payload)) {
      order_by_group[posted->message.subgroup].push_back(posted->message.id);
      group_of[posted->message.id] = posted->message.subgroup;
    }
  for (const auto& [pid, received] : result.received) {
    const auto& home = session.participant(pid)->subgroup;
    for (const auto& id : received)
      if (!home || group_of.at(id) != *home) ++audit.foreign_receipts;
    if (home && received != order_by_group[*home]) ++audit.order_mismatches;
  }
  return result;
}

std::optional<Millis> censored_median(std::vector<std::optional<Millis>> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const auto& lo = values[n / 2 - 1];
  const auto& hi = values[n / 2];
  if (!lo || !hi) return std::nullopt;
  return (*lo + *hi) / 2;
}

ScenarioSummary summarize(const ScenarioResult& result, std::size_t reach_target) {
  ScenarioSummary s;
  s.subgroups = subgroups_in_log(result.log).size();
  s.insights = result.propagation.size();
  for (const auto& e : result.log) {
    if (const auto* posted = std::get_if<MessagePosted>(&e.payload)) {
      if (posted->message.is_human()) {
        ++s.human_messages;
      } else {
        ++s.relayed_messages;
      }
    } else if (std::holds_alternative<InsightDelivered>(e.payload)) {
      ++s.deliveries;
    }
  }
  const std::size_t eligible = s.subgroups == 0 ? 0 : s.subgroups - 1;
  s.reach_target = reach_target != 0 ? reach_target : (eligible * 5 + 6) / 7;
  std::size_t reached = 0;
  std::vector<std::optional<Millis>> full;
  for (const auto& r : result.propagation) {
    if (r.coverage() >= s.reach_target) ++reached;
    full.push_back(r.time_to_full_coverage());
  }
  s.reach_share =
      s.insights == 0 ? 0.0 : static_cast<double>(reached) / static_cast<double>(s.insights);
  s.median_full_coverage = censored_median(std::move(full));
  s.gini = result.participation.gini;
  s.spread = result.participation.spread;
  return s;
}

}  // namespace csi
