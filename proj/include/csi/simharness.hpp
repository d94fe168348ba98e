#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csi/metrics.hpp"
#include "csi/model.hpp"

namespace csi {

struct ScheduledMessage {
  Millis offset{0};  // from session start
  std::string text;
};

struct ReplyPolicy {
  enum class Kind { silent, echo_topic };
  Kind kind = Kind::silent;
  double probability = 0.0;  // echo_topic: chance to answer each relay
};

/// A scripted participant. Offsets must be nondecreasing.
struct BotScript {
  std::string bot_id;
  std::vector<ScheduledMessage> schedule;
  ReplyPolicy reply;
};

class ScriptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Routing checks made while the scenario runs.
struct RoutingAudit {
  std::size_t ticks = 0;
  std::size_t deliveries = 0;
  std::size_t self_deliveries = 0;
  std::size_t duplicate_deliveries = 0;
  /// Ticks at which a subgroup was eligible, some pooled insight qualified
  /// for it, and it still received nothing.
  std::size_t starvation_violations = 0;
  /// Longest stretch a subgroup went without a delivery while a qualifying
  /// candidate existed at every tick of the stretch.
  Millis longest_qualified_wait{0};
  /// Members whose receive log differs from their subgroup's message order.
  std::size_t order_mismatches = 0;
  /// Messages a participant received from a subgroup other than their own.
  std::size_t foreign_receipts = 0;

  bool clean() const {
    return self_deliveries == 0 && duplicate_deliveries == 0 && starvation_violations == 0 &&
           order_mismatches == 0 && foreign_receipts == 0;
  }
};

struct ScenarioOptions {
  RoutingTopology topology = RoutingTopology::fully_connected;
  /// Extra delay range for echo replies.
  Millis reply_delay_min{2'000};
  Millis reply_delay_max{8'000};
  /// Run the per-tick starvation check (brute force; costs time on big pools).
  bool audit_starvation = true;
};

struct ScenarioResult {
  std::vector<SessionEvent> log;
  std::vector<PropagationRecord> propagation;
  ParticipationMetrics participation;
  RoutingAudit audit;
  /// Message ids each participant's client received, in arrival order.
  std::map<ParticipantId, std::vector<MessageId>> received;
};

/// Runs a whole session on a virtual clock with the stub distiller. Bots join
/// in script order before the start, messages are posted at their offsets
/// (before any tick at the same instant), and the scheduler ticks every
/// tick_interval until the session ends. The config's random_seed is
/// replaced by `seed`. Throws ScriptError for unordered schedules or a roster
/// the mode cannot start with.
ScenarioResult run_scenario(const SessionConfig& config, std::span<const BotScript> scripts,
                            std::uint64_t seed, const ScenarioOptions& options = {});

/// Summary numbers for a finished run.
struct ScenarioSummary {
  std::size_t subgroups = 0;
  std::size_t insights = 0;
  std::size_t deliveries = 0;
  std::size_t human_messages = 0;
  std::size_t relayed_messages = 0;
  /// Share of insights that reached at least `reach_target` subgroups.
  double reach_share = 0.0;
  std::size_t reach_target = 0;
  /// Median creation-to-full-coverage time; insights that never reached full
  /// coverage count as infinitely slow. none when the median is one of those.
  std::optional<Millis> median_full_coverage;
  double gini = 0.0;
  std::size_t spread = 0;
};

/// `reach_target` 0 means ceil(5/7 of the eligible receivers), i.e. 10 of 14.
ScenarioSummary summarize(const ScenarioResult& result, std::size_t reach_target = 0);

/// Median with none treated as +infinity.
std::optional<Millis> censored_median(std::vector<std::optional<Millis>> values);

}  // namespace csi
