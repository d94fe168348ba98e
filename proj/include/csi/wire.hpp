#pragma once

// Line-delimited JSON records exchanged with chat clients over TCP. Every
// record is one JSON object on one line with a "type" field.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "csi/model.hpp"
#include "csi/survey.hpp"

namespace csi::wire {

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Client -> server.

struct Join {
  std::string session_id;
  std::string display_name;
  // Reconnect: rebind an existing participant and replay the subgroup's
  // messages after `resume_after` (all of them when empty).
  std::string participant_id;
  std::string resume_after;
  friend bool operator==(const Join&, const Join&) = default;
};

struct Chat {
  std::string text;
  friend bool operator==(const Chat&, const Chat&) = default;
};

/// Answers keyed q1..q7 on the wire.
struct Survey {
  std::array<survey::Method, survey::kQuestionCount> answers{};
  friend bool operator==(const Survey&, const Survey&) = default;
};

using ClientRecord = std::variant<Join, Chat, Survey>;

ClientRecord parse_client_record(std::string_view line);
std::string encode(const ClientRecord& record);

// Server -> client.

struct RosterEntry {
  ParticipantId participant_id;
  std::string display_name;
  friend bool operator==(const RosterEntry&, const RosterEntry&) = default;
};

/// Sent on join and again whenever the participant's placement changes.
struct Welcome {
  ParticipantId participant_id;
  std::optional<SubgroupId> subgroup_id;  // null in the lobby or while queued
  std::vector<RosterEntry> roster;        // subgroup members, self included
  friend bool operator==(const Welcome&, const Welcome&) = default;
};

struct ChatOut {
  MessageId message_id;
  std::string author_kind;  // "participant" | "surrogate"
  std::string author_name;
  std::string text;
  std::string provenance;  // "original" | "relayed"
  Millis timestamp{0};
  friend bool operator==(const ChatOut&, const ChatOut&) = default;
};

struct System {
  std::string phase;  // "lobby" | "running" | "ended"
  long long remaining_seconds = 0;
  std::string task_prompt;
  friend bool operator==(const System&, const System&) = default;
};

struct Ended {
  std::string report_ref;  // control-API path of the report
  friend bool operator==(const Ended&, const Ended&) = default;
};

/// A rejected client record. The connection stays open.
struct Error {
  std::string reason;
  friend bool operator==(const Error&, const Error&) = default;
};

using ServerRecord = std::variant<Welcome, ChatOut, System, Ended, Error>;

ServerRecord parse_server_record(std::string_view line);
std::string encode(const ServerRecord& record);

}  // namespace csi::wire
