#pragma once

// JSON mapping for the domain types. Field names here are the event-log and
// control-API schema.

#include <json.hpp>

#include "csi/model.hpp"

namespace csi {

using nlohmann::json;

template <class Tag>
void to_json(json& j, const Id<Tag>& id) {
  j = id.value;
}

template <class Tag>
void from_json(const json& j, Id<Tag>& id) {
  id.value = j.get<std::string>();
}

/// Seconds in documents, milliseconds in memory.
json seconds_to_json(Millis value);
Millis seconds_from_json(const json& j);

void to_json(json& j, const LlmEndpoint& v);
void from_json(const json& j, LlmEndpoint& v);

void to_json(json& j, const SessionConfig& v);
/// Missing fields keep their defaults, so a config document may be partial.
void from_json(const json& j, SessionConfig& v);

void to_json(json& j, const Participant& v);
void from_json(const json& j, Participant& v);
void to_json(json& j, const Subgroup& v);
void from_json(const json& j, Subgroup& v);
void to_json(json& j, const ChatMessage& v);
void from_json(const json& j, ChatMessage& v);
void to_json(json& j, const Insight& v);
void from_json(const json& j, Insight& v);

/// One event-log record: {"seq", "type", "wall_time", ...payload fields}.
void to_json(json& j, const SessionEvent& v);
void from_json(const json& j, SessionEvent& v);

}  // namespace csi
