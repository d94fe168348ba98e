#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csi/matchmaker.hpp"
#include "csi/model.hpp"
#include "csi/partitioner.hpp"
#include "csi/surrogate.hpp"
#include "csi/survey.hpp"
#include "csi/taxonomy.hpp"

namespace csi {

enum class Phase { lobby, running, ended };
std::string_view to_string(Phase phase);

/// Rejected user action (bad phase, unknown participant, ...). The session
/// state is unchanged when this is thrown.
class SessionError : public std::runtime_error {
 public:
  enum class Code {
    invalid_config,
    wrong_phase,
    roster_too_small,
    unknown_participant,
    not_assigned,
    empty_message,
    message_too_long,
    already_submitted,
  };

  SessionError(Code code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(SessionError::Code code);

inline constexpr std::size_t kMaxMessageLength = 4000;

struct JoinResult {
  Participant participant;
  /// Everyone who became placed by this join: the joiner, or all members of a
  /// newly opened subgroup. Empty while queued or in the lobby.
  std::vector<Participant> placed;
};

/// A chat message plus the participants whose clients should receive it.
struct Broadcast {
  ChatMessage message;
  std::vector<ParticipantId> recipients;
};

struct TickOutcome {
  std::vector<Insight> created;
  std::vector<Delivery> deliveries;
  std::vector<Broadcast> relays;
  bool ended = false;
};

/// Drafts computed outside the session (e.g. by a remote model), keyed by the
/// source subgroup. none = the backend produced nothing this cycle.
using DraftMap = std::map<SubgroupId, std::optional<InsightDraft>>;

/// One deliberation session.
///
/// Every state change is an event: `emit` stamps the next sequence number,
/// folds the event into the state with `apply`, appends it to the log and
/// notifies the listener. `replay` runs the same `apply` over a stored log, so
/// a replayed session is indistinguishable from the live one.
class Session {
 public:
  using Listener = std::function<void(const SessionEvent&)>;
  /// Called once per scheduler tick after distillation and before routing.
  using TickObserver = std::function<void(const Session&, Millis now)>;

  /// Throws SessionError(invalid_config) listing every violated invariant.
  explicit Session(SessionConfig config,
                   RoutingTopology topology = RoutingTopology::fully_connected);

  void set_listener(Listener listener) { listener_ = std::move(listener); }
  void set_tick_observer(TickObserver observer) { tick_observer_ = std::move(observer); }
  void set_distiller(std::shared_ptr<Distiller> distiller) { distiller_ = std::move(distiller); }

  JoinResult join(std::string display_name, Millis now);
  void start(Millis now);
  Broadcast post_message(const ParticipantId& author, std::string text, Millis now);

  /// Subgroups whose surrogate is due to distill at `now`.
  std::vector<SubgroupId> distillations_due(Millis now) const;
  const SurrogateState& surrogate_state(const SubgroupId& subgroup) const;

  /// Distill with the installed distiller (extractive by default), then route.
  TickOutcome scheduler_tick(Millis now);
  /// Same, with drafts supplied by the caller. Due subgroups without an entry
  /// skip distillation this tick.
  TickOutcome scheduler_tick(Millis now, const DraftMap& drafts);

  bool due_to_end(Millis now) const;
  /// Idempotent: false if the session had already ended.
  bool end(Millis now, const std::string& reason = "manual");

  void submit_survey(const ParticipantId& participant,
                     const std::array<survey::Method, survey::kQuestionCount>& answers);

  /// Rebuilds a session from its log. The config and topology come from the
  /// session_started record when present. Throws std::runtime_error naming the
  /// offending sequence number when the log is not internally consistent.
  static Session replay(std::span<const SessionEvent> log,
                        const SessionConfig& fallback_config = {});

  /// Canonical JSON dump of the derived state; equal strings mean equal state.
  std::string snapshot_json() const;

  const SessionConfig& config() const { return config_; }
  RoutingTopology topology() const { return topology_; }
  Phase phase() const { return phase_; }
  std::optional<Millis> started_at() const { return started_at_; }
  Millis remaining(Millis now) const;
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::map<ParticipantId, Participant>& participants() const { return participants_; }
  const Participant* participant(const ParticipantId& id) const;
  const std::vector<Subgroup>& subgroups() const { return subgroups_; }
  const Subgroup* subgroup(const SubgroupId& id) const;
  const std::map<SubgroupId, SurrogateState>& surrogates() const { return surrogates_; }
  const Matchmaker& matchmaker() const { return matchmaker_; }
  const std::map<InsightId, Insight>& insights() const { return insights_; }
  /// Live idea index, fed every human message as it is posted.
  const IdeaIndex& taxonomy() const { return taxonomy_; }
  const std::vector<ParticipantId>& join_queue() const { return queued_; }
  const std::vector<survey::SurveyResponse>& surveys() const { return surveys_; }
  std::size_t message_count() const { return message_count_; }

 private:
  const SessionEvent& emit(Millis now, EventPayload payload);
  void apply(const SessionEvent& event);
  void apply_started(const SessionStarted& started, Millis at);
  void apply_joined(const ParticipantJoined& joined, Millis at);
  void apply_posted(const MessagePosted& posted);
  void open_subgroup(const SubgroupId& id, const std::vector<ParticipantId>& members, Millis at);

  Millis clamp_time(Millis now) const;
  SubgroupId next_subgroup_id() const;
  bool accept_draft(const SubgroupId& source, const InsightDraft& draft) const;
  TickOutcome run_tick(Millis now, const DraftMap* drafts);
  std::vector<ParticipantId> members_except(const SubgroupId& id,
                                            const std::optional<ParticipantId>& skip) const;

  SessionConfig config_;
  RoutingTopology topology_;
  DistillerPolicy policy_;
  Listener listener_;
  TickObserver tick_observer_;
  std::shared_ptr<Distiller> distiller_;

  Phase phase_ = Phase::lobby;
  std::optional<Millis> started_at_;
  std::vector<SessionEvent> events_;
  std::map<ParticipantId, Participant> participants_;
  std::vector<Subgroup> subgroups_;
  std::map<SubgroupId, SurrogateState> surrogates_;
  Matchmaker matchmaker_;
  LateJoinAllocator allocator_;
  std::vector<ParticipantId> queued_;
  std::map<InsightId, Insight> insights_;
  IdeaIndex taxonomy_;
  std::map<SubgroupId, std::uint64_t> relay_counts_;
  std::size_t message_count_ = 0;
  std::vector<survey::SurveyResponse> surveys_;
};

}  // namespace csi
