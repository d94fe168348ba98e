#include "csi/wire.hpp"

#include "csi/serialize.hpp"

namespace csi::wire {

namespace {

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw WireError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw WireError("record must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw WireError("record has no type");
  return j;
}

std::string string_field(const json& j, const char* key, bool required = true) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw WireError(std::string("missing field ") + key);
    return {};
  }
  if (!it->is_string()) throw WireError(std::string("field ") + key + " must be a string");
  return it->get<std::string>();
}

}  // namespace

ClientRecord parse_client_record(std::string_view line) {
  const json j = parse_object(line);
  const std::string type = j["type"];
  if (type == "join")
    return Join{string_field(j, "session_id"), string_field(j, "display_name", false),
                string_field(j, "participant_id", false), string_field(j, "resume_after", false)};
  if (type == "chat") return Chat{string_field(j, "text")};
  if (type == "survey") {
    auto it = j.find("answers");
    if (it == j.end() || !it->is_object()) throw WireError("survey answers must be an object");
    Survey s;
    for (std::size_t q = 0; q < survey::kQuestionCount; ++q) {
      const std::string key(survey::kQuestionIds[q]);
      auto a = it->find(key);
      if (a == it->end() || !a->is_string()) throw WireError("survey answer " + key + " missing");
      try {
        s.answers[q] = survey::parse_method(a->get<std::string>());
      } catch (const survey::SurveyError& e) {
        throw WireError(e.what());
      }
    }
    return s;
  }
  throw WireError("unknown client record type: " + type);
}

std::string encode(const ClientRecord& record) {
  json j;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Join>) {
          j = {{"type", "join"}, {"session_id", r.session_id}, {"display_name", r.display_name}};
          if (!r.participant_id.empty()) j["participant_id"] = r.participant_id;
          if (!r.resume_after.empty()) j["resume_after"] = r.resume_after;
        } else if constexpr (std::is_same_v<T, Chat>) {
          j = {{"type", "chat"}, {"text", r.text}};
        } else {
          json answers;
          for (std::size_t q = 0; q < survey::kQuestionCount; ++q)
            answers[std::string(survey::kQuestionIds[q])] = survey::to_string(r.answers[q]);
          j = {{"type", "survey"}, {"answers", answers}};
        }
      },
      record);
  return j.dump();
}

ServerRecord parse_server_record(std::string_view line) {
  const json j = parse_object(line);
  const std::string type = j["type"];
  try {
    if (type == "welcome") {
      Welcome w;
      w.participant_id = ParticipantId(string_field(j, "participant_id"));
      if (j.contains("subgroup_id") && !j["subgroup_id"].is_null())
        w.subgroup_id = SubgroupId(j["subgroup_id"].get<std::string>());
      for (const auto& e : j.at("roster"))
        w.roster.push_back({ParticipantId(e.at("participant_id").get<std::string>()),
                            e.at("display_name").get<std::string>()});
      return w;
    }
    if (type == "chat")
      return ChatOut{MessageId(string_field(j, "message_id")), string_field(j, "author_kind"),
                     string_field(j, "author_name"),  string_field(j, "text"),
                     string_field(j, "provenance"),   Millis{j.at("timestamp").get<long long>()}};
    if (type == "system")
      return System{string_field(j, "phase"), j.at("remaining_seconds").get<long long>(),
                    string_field(j, "task_prompt", false)};
    if (type == "ended") return Ended{string_field(j, "report_ref")};
    if (type == "error") return Error{string_field(j, "reason")};
  } catch (const json::exception& e) {
    throw WireError(std::string("malformed ") + type + " record: " + e.what());
  }
  throw WireError("unknown server record type: " + type);
}

std::string encode(const ServerRecord& record) {
  json j;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Welcome>) {
          json roster = json::array();
          for (const auto& e : r.roster)
            roster.push_back({{"participant_id", e.participant_id},
                              {"display_name", e.display_name}});
          j = {{"type", "welcome"},
               {"participant_id", r.participant_id},
               {"subgroup_id", r.subgroup_id ? json(*r.subgroup_id) : json(nullptr)},
               {"roster", roster}};
        } else if constexpr (std::is_same_v<T, ChatOut>) {
          j = {{"type", "chat"},          {"message_id", r.message_id},
               {"author_kind", r.author_kind}, {"author_name", r.author_name},
               {"text", r.text},          {"provenance", r.provenance},
               {"timestamp", r.timestamp.count()}};
        } else if constexpr (std::is_same_v<T, System>) {
          j = {{"type", "system"},
               {"phase", r.phase},
               {"remaining_seconds", r.remaining_seconds},
               {"task_prompt", r.task_prompt}};
        } else if constexpr (std::is_same_v<T, Ended>) {
          j = {{"type", "ended"}, {"report_ref", r.report_ref}};
        } else {
          j = {{"type", "error"}, {"reason", r.reason}};
        }
      },
      record);
  return j.dump();
}

}  // namespace csi::wire
