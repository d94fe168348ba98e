#include "csi/model.hpp"

#include <cstdio>

namespace csi {

std::vector<std::string> validate_config(const SessionConfig& config) {
  std::vector<std::string> violations;
  if (config.mode == SessionMode::csi) {
    if (config.target_subgroup_size < 4) violations.emplace_back("size below 4");
    if (config.target_subgroup_size > 7) violations.emplace_back("size above 7");
  }
  if (config.duration <= Millis{0}) violations.emplace_back("duration > 0");
  if (config.tick_interval <= Millis{0}) violations.emplace_back("tick_interval > 0");
  if (config.starvation_threshold < config.tick_interval)
    violations.emplace_back("starvation_threshold >= tick_interval");
  if (!(config.novelty_floor >= 0.0 && config.novelty_floor <= 1.0))
    violations.emplace_back("novelty_floor in [0,1]");
  if (!(config.dedup_floor >= 0.0 && config.dedup_floor <= 1.0))
    violations.emplace_back("dedup_floor in [0,1]");
  if (config.pool_max_size == 0) violations.emplace_back("pool_max_size >= 1");
  if (config.profile_window == 0) violations.emplace_back("profile_window >= 1");
  if (config.distill_every_messages == 0) violations.emplace_back("distill_every_messages >= 1");
  if (config.distill_every <= Millis{0}) violations.emplace_back("distill_every > 0");
  if (!(config.merge_threshold > 0.0 && config.merge_threshold <= 1.0))
    violations.emplace_back("merge_threshold in (0,1]");
  if (config.impact_window <= Millis{0}) violations.emplace_back("impact_window > 0");
  if (config.distiller_backend == DistillerBackend::external_llm) {
    if (config.llm.url.empty()) violations.emplace_back("external_llm requires llm.url");
    if (config.llm.timeout <= Millis{0}) violations.emplace_back("llm.timeout > 0");
  }
  return violations;
}

ChatMessage make_human_message(MessageId id, SubgroupId subgroup, ParticipantId author,
                               Millis timestamp, std::string text) {
  return ChatMessage{std::move(id), std::move(subgroup), Author{std::move(author)}, timestamp,
                     std::move(text), std::nullopt};
}

ChatMessage make_relay_message(MessageId id, SubgroupId subgroup, SurrogateId author,
                               Millis timestamp, std::string text, InsightId insight) {
  return ChatMessage{std::move(id), std::move(subgroup), Author{std::move(author)}, timestamp,
                     std::move(text), std::move(insight)};
}

bool provenance_consistent(const ChatMessage& message) {
  return message.is_human() != message.is_relay();
}

std::string_view event_type_name(const EventPayload& payload) {
  struct Visitor {
    std::string_view operator()(const SessionStarted&) const { return "session_started"; }
    std::string_view operator()(const ParticipantJoined&) const { return "participant_joined"; }
    std::string_view operator()(const MessagePosted&) const { return "message_posted"; }
    std::string_view operator()(const InsightCreated&) const { return "insight_created"; }
    std::string_view operator()(const InsightDelivered&) const { return "insight_delivered"; }
    std::string_view operator()(const SessionEnded&) const { return "session_ended"; }
  };
  return std::visit(Visitor{}, payload);
}

std::string_view to_string(SessionMode mode) {
  return mode == SessionMode::csi ? "csi" : "single_room";
}

std::string_view to_string(DistillerBackend backend) {
  return backend == DistillerBackend::stub_extractive ? "stub_extractive" : "external_llm";
}

std::string_view to_string(RoutingTopology topology) {
  return topology == RoutingTopology::fully_connected ? "fully_connected" : "ring";
}

SessionMode parse_session_mode(std::string_view text) {
  if (text == "csi") return SessionMode::csi;
  if (text == "single_room") return SessionMode::single_room;
  throw std::invalid_argument("unknown session mode: " + std::string(text));
}

DistillerBackend parse_distiller_backend(std::string_view text) {
  if (text == "stub_extractive") return DistillerBackend::stub_extractive;
  if (text == "external_llm") return DistillerBackend::external_llm;
  throw std::invalid_argument("unknown distiller backend: " + std::string(text));
}

RoutingTopology parse_routing_topology(std::string_view text) {
  if (text == "fully_connected") return RoutingTopology::fully_connected;
  if (text == "ring") return RoutingTopology::ring;
  throw std::invalid_argument("unknown routing topology: " + std::string(text));
}

std::string sequential_id(std::string_view prefix, std::uint64_t n, int width) {
  char digits[32];
  std::snprintf(digits, sizeof digits, "%0*llu", width, static_cast<unsigned long long>(n));
  std::string out(prefix);
  out += '-';
  out += digits;
  return out;
}

}  // namespace csi
