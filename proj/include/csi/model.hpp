#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace csi {

using Millis = std::chrono::milliseconds;

/// Opaque server-generated identifier. The tag keeps participant, subgroup,
/// message and insight ids from being mixed up at compile time.
template <class Tag>
struct Id {
  std::string value;

  Id() = default;
  explicit Id(std::string v) : value(std::move(v)) {}

  bool empty() const { return value.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;
};

using SessionId = Id<struct SessionTag>;
using ParticipantId = Id<struct ParticipantTag>;
using SubgroupId = Id<struct SubgroupTag>;
using SurrogateId = Id<struct SurrogateTag>;
using MessageId = Id<struct MessageTag>;
using InsightId = Id<struct InsightTag>;
using IdeaId = Id<struct IdeaTag>;

/// Thrown when a caller breaks an operation's precondition (a scheduler bug,
/// not bad user input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class SessionMode { csi, single_room };
enum class DistillerBackend { stub_extractive, external_llm };

/// Which subgroups may receive an insight. The live service always runs
/// fully connected; the ring is a simulator baseline.
enum class RoutingTopology { fully_connected, ring };

struct LlmEndpoint {
  std::string url;  // e.g. http://127.0.0.1:8081/v1/complete
  std::string model;
  Millis timeout{10'000};

  friend bool operator==(const LlmEndpoint&, const LlmEndpoint&) = default;
};

struct SessionConfig {
  SessionId session_id;
  SessionMode mode = SessionMode::csi;
  int target_subgroup_size = 5;
  std::string task_prompt;
  Millis duration{720'000};
  Millis tick_interval{5'000};
  Millis starvation_threshold{45'000};
  double novelty_floor = 0.3;
  DistillerBackend distiller_backend = DistillerBackend::stub_extractive;
  std::uint64_t random_seed = 0;

  // Matchmaker.
  double dedup_floor = 0.2;
  std::size_t pool_max_size = 64;
  std::size_t profile_window = 30;

  // Surrogate distillation trigger: every K human messages or T, whichever first.
  std::size_t distill_every_messages = 6;
  Millis distill_every{60'000};
  std::size_t distill_min_tokens = 5;

  // Taxonomy.
  double merge_threshold = 0.5;
  std::size_t assertion_min_tokens = 3;
  Millis impact_window{120'000};
  Millis stance_thread_window{60'000};

  LlmEndpoint llm;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

/// Every violated invariant, as a short human-readable message. Empty means
/// the config is valid.
std::vector<std::string> validate_config(const SessionConfig& config);

struct Participant {
  ParticipantId id;
  std::string display_name;
  std::optional<SubgroupId> subgroup;

  friend bool operator==(const Participant&, const Participant&) = default;
};

struct Subgroup {
  SubgroupId id;
  std::set<ParticipantId> members;
  std::optional<SurrogateId> surrogate;  // none in single_room mode

  friend bool operator==(const Subgroup&, const Subgroup&) = default;
};

using Author = std::variant<ParticipantId, SurrogateId>;

struct ChatMessage {
  MessageId id;
  SubgroupId subgroup;
  Author author;
  Millis timestamp{0};
  std::string text;
  std::optional<InsightId> relayed_from;  // none = original

  bool is_human() const { return std::holds_alternative<ParticipantId>(author); }
  bool is_relay() const { return relayed_from.has_value(); }

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

ChatMessage make_human_message(MessageId id, SubgroupId subgroup, ParticipantId author,
                               Millis timestamp, std::string text);
ChatMessage make_relay_message(MessageId id, SubgroupId subgroup, SurrogateId author,
                               Millis timestamp, std::string text, InsightId insight);

/// Human messages are original; surrogate messages are relays.
bool provenance_consistent(const ChatMessage& message);

struct Insight {
  InsightId id;
  SubgroupId source_subgroup;
  std::string text;
  std::vector<MessageId> source_message_ids;
  Millis created_at{0};
  std::set<SubgroupId> delivered_to;

  friend bool operator==(const Insight&, const Insight&) = default;
};

// Event-log payloads.

struct SessionStarted {
  SessionConfig config;
  std::vector<Subgroup> subgroups;
  RoutingTopology topology = RoutingTopology::fully_connected;

  friend bool operator==(const SessionStarted&, const SessionStarted&) = default;
};

struct ParticipantJoined {
  Participant participant;  // subgroup set only for late joins

  friend bool operator==(const ParticipantJoined&, const ParticipantJoined&) = default;
};

struct MessagePosted {
  ChatMessage message;

  friend bool operator==(const MessagePosted&, const MessagePosted&) = default;
};

struct InsightCreated {
  Insight insight;

  friend bool operator==(const InsightCreated&, const InsightCreated&) = default;
};

struct InsightDelivered {
  InsightId insight_id;
  SubgroupId receiver;

  friend bool operator==(const InsightDelivered&, const InsightDelivered&) = default;
};

struct SessionEnded {
  std::string reason;  // "duration" or "manual"

  friend bool operator==(const SessionEnded&, const SessionEnded&) = default;
};

using EventPayload = std::variant<SessionStarted, ParticipantJoined, MessagePosted,
                                  InsightCreated, InsightDelivered, SessionEnded>;

struct SessionEvent {
  std::uint64_t sequence_no = 0;
  Millis wall_time{0};
  EventPayload payload;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

std::string_view event_type_name(const EventPayload& payload);

std::string_view to_string(SessionMode mode);
std::string_view to_string(DistillerBackend backend);
std::string_view to_string(RoutingTopology topology);
SessionMode parse_session_mode(std::string_view text);
DistillerBackend parse_distiller_backend(std::string_view text);
RoutingTopology parse_routing_topology(std::string_view text);

/// Zero-padded sequential ids, so lexicographic order matches creation order.
std::string sequential_id(std::string_view prefix, std::uint64_t n, int width);

}  // namespace csi

template <class Tag>
struct std::hash<csi::Id<Tag>> {
  std::size_t operator()(const csi::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
