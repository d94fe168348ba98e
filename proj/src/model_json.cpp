#include <cmath>

#include "csi/serialize.hpp"

namespace csi {

namespace {

template <class T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void read_optional_seconds(const json& j, const char* key, Millis& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = seconds_from_json(*it);
}

}  // namespace

json seconds_to_json(Millis value) {
  const auto ms = value.count();
  if (ms % 1000 == 0) return json(ms / 1000);
  return json(static_cast<double>(ms) / 1000.0);
}

Millis seconds_from_json(const json& j) {
  if (j.is_number_integer()) return Millis{j.get<std::int64_t>() * 1000};
  return Millis{std::llround(j.get<double>() * 1000.0)};
}

void to_json(json& j, const LlmEndpoint& v) {
  j = json{{"url", v.url}, {"model", v.model}, {"timeout", seconds_to_json(v.timeout)}};
}

void from_json(const json& j, LlmEndpoint& v) {
  read_optional(j, "url", v.url);
  read_optional(j, "model", v.model);
  read_optional_seconds(j, "timeout", v.timeout);
}

void to_json(json& j, const SessionConfig& v) {
  j = json{{"session_id", v.session_id},
           {"mode", to_string(v.mode)},
           {"target_subgroup_size", v.target_subgroup_size},
           {"task_prompt", v.task_prompt},
           {"duration", seconds_to_json(v.duration)},
           {"tick_interval", seconds_to_json(v.tick_interval)},
           {"starvation_threshold", seconds_to_json(v.starvation_threshold)},
           {"novelty_floor", v.novelty_floor},
           {"distiller_backend", to_string(v.distiller_backend)},
           {"random_seed", v.random_seed},
           {"dedup_floor", v.dedup_floor},
           {"pool_max_size", v.pool_max_size},
           {"profile_window", v.profile_window},
           {"distill_every_messages", v.distill_every_messages},
           {"distill_every", seconds_to_json(v.distill_every)},
           {"distill_min_tokens", v.distill_min_tokens},
           {"merge_threshold", v.merge_threshold},
           {"assertion_min_tokens", v.assertion_min_tokens},
           {"impact_window", seconds_to_json(v.impact_window)},
           {"stance_thread_window", seconds_to_json(v.stance_thread_window)},
           {"llm", v.llm}};
}

void from_json(const json& j, SessionConfig& v) {
  if (!j.is_object()) throw std::invalid_argument("session config must be a JSON object");
  read_optional(j, "session_id", v.session_id);
  if (auto it = j.find("mode"); it != j.end()) v.mode = parse_session_mode(it->get<std::string>());
  read_optional(j, "target_subgroup_size", v.target_subgroup_size);
  read_optional(j, "task_prompt", v.task_prompt);
  read_optional_seconds(j, "duration", v.duration);
  read_optional_seconds(j, "tick_interval", v.tick_interval);
  read_optional_seconds(j, "starvation_threshold", v.starvation_threshold);
  read_optional(j, "novelty_floor", v.novelty_floor);
  if (auto it = j.find("distiller_backend"); it != j.end())
    v.distiller_backend = parse_distiller_backend(it->get<std::string>());
  read_optional(j, "random_seed", v.random_seed);
  read_optional(j, "dedup_floor", v.dedup_floor);
  read_optional(j, "pool_max_size", v.pool_max_size);
  read_optional(j, "profile_window", v.profile_window);
  read_optional(j, "distill_every_messages", v.distill_every_messages);
  read_optional_seconds(j, "distill_every", v.distill_every);
  read_optional(j, "distill_min_tokens", v.distill_min_tokens);
  read_optional(j, "merge_threshold", v.merge_threshold);
  read_optional(j, "assertion_min_tokens", v.assertion_min_tokens);
  read_optional_seconds(j, "impact_window", v.impact_window);
  read_optional_seconds(j, "stance_thread_window", v.stance_thread_window);
  read_optional(j, "llm", v.llm);
}

void to_json(json& j, const Participant& v) {
  j = json{{"participant_id", v.id},
           {"display_name", v.display_name},
           {"subgroup_id", v.subgroup ? json(v.subgroup->value) : json(nullptr)}};
}

void from_json(const json& j, Participant& v) {
  v.id = j.at("participant_id").get<ParticipantId>();
  v.display_name = j.at("display_name").get<std::string>();
  const auto& g = j.at("subgroup_id");
  v.subgroup = g.is_null() ? std::nullopt : std::optional<SubgroupId>(g.get<SubgroupId>());
}

void to_json(json& j, const Subgroup& v) {
  j = json{{"subgroup_id", v.id},
           {"member_ids", v.members},
           {"surrogate_id", v.surrogate ? json(v.surrogate->value) : json(nullptr)}};
}

void from_json(const json& j, Subgroup& v) {
  v.id = j.at("subgroup_id").get<SubgroupId>();
  v.members = j.at("member_ids").get<std::set<ParticipantId>>();
  const auto& s = j.at("surrogate_id");
  v.surrogate = s.is_null() ? std::nullopt : std::optional<SurrogateId>(s.get<SurrogateId>());
}

void to_json(json& j, const ChatMessage& v) {
  json author = v.is_human()
                    ? json{{"kind", "human"}, {"id", std::get<ParticipantId>(v.author)}}
                    : json{{"kind", "surrogate"}, {"id", std::get<SurrogateId>(v.author)}};
  json provenance = v.relayed_from
                        ? json{{"kind", "relayed"}, {"insight_id", *v.relayed_from}}
                        : json{{"kind", "original"}};
  j = json{{"message_id", v.id},
           {"subgroup_id", v.subgroup},
           {"author", std::move(author)},
           {"timestamp", v.timestamp.count()},
           {"text", v.text},
           {"provenance", std::move(provenance)}};
}

void from_json(const json& j, ChatMessage& v) {
  v.id = j.at("message_id").get<MessageId>();
  v.subgroup = j.at("subgroup_id").get<SubgroupId>();
  const auto& author = j.at("author");
  const auto kind = author.at("kind").get<std::string>();
  if (kind == "human") {
    v.author = author.at("id").get<ParticipantId>();
  } else if (kind == "surrogate") {
    v.author = author.at("id").get<SurrogateId>();
  } else {
    throw std::invalid_argument("unknown author kind: " + kind);
  }
  v.timestamp = Millis{j.at("timestamp").get<std::int64_t>()};
  v.text = j.at("text").get<std::string>();
  const auto& provenance = j.at("provenance");
  const auto pkind = provenance.at("kind").get<std::string>();
  if (pkind == "original") {
    v.relayed_from.reset();
  } else if (pkind == "relayed") {
    v.relayed_from = provenance.at("insight_id").get<InsightId>();
  } else {
    throw std::invalid_argument("unknown provenance kind: " + pkind);
  }
}

void to_json(json& j, const Insight& v) {
  j = json{{"insight_id", v.id},
           {"source_subgroup", v.source_subgroup},
           {"text", v.text},
           {"source_message_ids", v.source_message_ids},
           {"created_at", v.created_at.count()},
           {"delivered_to", v.delivered_to}};
}

void from_json(const json& j, Insight& v) {
  v.id = j.at("insight_id").get<InsightId>();
  v.source_subgroup = j.at("source_subgroup").get<SubgroupId>();
  v.text = j.at("text").get<std::string>();
  v.source_message_ids = j.at("source_message_ids").get<std::vector<MessageId>>();
  v.created_at = Millis{j.at("created_at").get<std::int64_t>()};
  v.delivered_to = j.at("delivered_to").get<std::set<SubgroupId>>();
}

void to_json(json& j, const SessionEvent& v) {
  j = json{{"seq", v.sequence_no},
           {"type", event_type_name(v.payload)},
           {"wall_time", v.wall_time.count()}};
  struct Writer {
    json& j;
    void operator()(const SessionStarted& p) const {
      j["config"] = p.config;
      j["subgroups"] = p.subgroups;
      j["topology"] = to_string(p.topology);
    }
    void operator()(const ParticipantJoined& p) const { j["participant"] = p.participant; }
    void operator()(const MessagePosted& p) const { j["message"] = p.message; }
    void operator()(const InsightCreated& p) const { j["insight"] = p.insight; }
    void operator()(const InsightDelivered& p) const {
      j["insight_id"] = p.insight_id;
      j["receiver"] = p.receiver;
    }
    void operator()(const SessionEnded& p) const { j["reason"] = p.reason; }
  };
  std::visit(Writer{j}, v.payload);
}

void from_json(const json& j, SessionEvent& v) {
  v.sequence_no = j.at("seq").get<std::uint64_t>();
  v.wall_time = Millis{j.at("wall_time").get<std::int64_t>()};
  const auto type = j.at("type").get<std::string>();
  if (type == "session_started") {
    SessionStarted p;
    p.config = j.at("config").get<SessionConfig>();
    p.subgroups = j.at("subgroups").get<std::vector<Subgroup>>();
    p.topology = parse_routing_topology(j.at("topology").get<std::string>());
    v.payload = std::move(p);
  } else if (type == "participant_joined") {
    v.payload = ParticipantJoined{j.at("participant").get<Participant>()};
  } else if (type == "message_posted") {
    v.payload = MessagePosted{j.at("message").get<ChatMessage>()};
  } else if (type == "insight_created") {
    v.payload = InsightCreated{j.at("insight").get<Insight>()};
  } else if (type == "insight_delivered") {
    v.payload = InsightDelivered{j.at("insight_id").get<InsightId>(),
                                 j.at("receiver").get<SubgroupId>()};
  } else if (type == "session_ended") {
    v.payload = SessionEnded{j.at("reason").get<std::string>()};
  } else {
    throw std::invalid_argument("unknown event type: " + type);
  }
}

}  // namespace csi
