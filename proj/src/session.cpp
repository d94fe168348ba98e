#include "csi/session.hpp"

#include <algorithm>

#include "csi/serialize.hpp"
#include "csi/text.hpp"

namespace csi {

namespace {

std::string join_messages(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

SurrogateId surrogate_for(const SubgroupId& id) {
  // g-007 -> a-007
  return SurrogateId("a" + id.value.substr(1));
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::lobby: return "lobby";
    case Phase::running: return "running";
    case Phase::ended: return "ended";
  }
  return "unknown";
}

std::string_view to_string(SessionError::Code code) {
  using C = SessionError::Code;
  switch (code) {
    case C::invalid_config: return "invalid_config";
    case C::wrong_phase: return "wrong_phase";
    case C::roster_too_small: return "roster_too_small";
    case C::unknown_participant: return "unknown_participant";
    case C::not_assigned: return "not_assigned";
    case C::empty_message: return "empty_message";
    case C::message_too_long: return "message_too_long";
    case C::already_submitted: return "already_submitted";
  }
  return "unknown";
}

Session::Session(SessionConfig config, RoutingTopology topology)
    : config_(std::move(config)),
      topology_(topology),
      policy_(DistillerPolicy::from(config_)),
      distiller_(std::make_shared<ExtractiveDistiller>()),
      matchmaker_(MatchmakerConfig::from(config_, topology)),
      taxonomy_(TaxonomyConfig::from(config_)) {
  if (auto problems = validate_config(config_); !problems.empty())
    throw SessionError(SessionError::Code::invalid_config,
                       "invalid session config: " + join_messages(problems));
}

Millis Session::clamp_time(Millis now) const {
  if (!events_.empty() && now < events_.back().wall_time) return events_.back().wall_time;
  return now;
}

SubgroupId Session::next_subgroup_id() const {
  return SubgroupId(sequential_id("g", subgroups_.size() + 1, 3));
}

const SessionEvent& Session::emit(Millis now, EventPayload payload) {
  SessionEvent event{events_.size() + 1, now, std::move(payload)};
  apply(event);
  events_.push_back(std::move(event));
  if (listener_) listener_(events_.back());
  return events_.back();
}

// State transitions. Everything below is shared by the live path and replay.

void Session::apply(const SessionEvent& event) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SessionStarted>) {
          apply_started(p, event.wall_time);
        } else if constexpr (std::is_same_v<T, ParticipantJoined>) {
          apply_joined(p, event.wall_time);
        } else if constexpr (std::is_same_v<T, MessagePosted>) {
          apply_posted(p);
        } else if constexpr (std::is_same_v<T, InsightCreated>) {
          if (phase_ != Phase::running) throw ContractViolation("insight outside running phase");
          auto it = surrogates_.find(p.insight.source_subgroup);
          if (it == surrogates_.end())
            throw ContractViolation("insight from subgroup without surrogate");
          if (insights_.contains(p.insight.id))
            throw ContractViolation("duplicate insight id " + p.insight.id.value);
          commit_distillation(it->second, p.insight);
          auto admitted = matchmaker_.enqueue(p.insight);
          if (!admitted.admitted)
            throw ContractViolation("insight rejected by pool: " + p.insight.id.value);
          insights_.emplace(p.insight.id, p.insight);
        } else if constexpr (std::is_same_v<T, InsightDelivered>) {
          if (phase_ != Phase::running) throw ContractViolation("delivery outside running phase");
          matchmaker_.record_delivery(Delivery{p.receiver, p.insight_id}, event.wall_time);
          insights_.at(p.insight_id).delivered_to.insert(p.receiver);
        } else if constexpr (std::is_same_v<T, SessionEnded>) {
          if (phase_ == Phase::ended) throw ContractViolation("session ended twice");
          phase_ = Phase::ended;
        }
      },
      event.payload);
}

void Session::apply_started(const SessionStarted& started, Millis at) {
  if (phase_ != Phase::lobby) throw ContractViolation("session started twice");
  if (started.config != config_) throw ContractViolation("config differs from session config");
  if (started.topology != topology_) throw ContractViolation("topology mismatch");
  std::set<ParticipantId> placed;
  for (const auto& g : started.subgroups) {
    if (g.id != next_subgroup_id()) throw ContractViolation("subgroup ids out of order");
    for (const auto& m : g.members) {
      if (!participants_.contains(m)) throw ContractViolation("unknown member " + m.value);
      if (!placed.insert(m).second) throw ContractViolation("member in two subgroups");
      participants_.at(m).subgroup = g.id;
    }
    subgroups_.push_back(g);
    if (config_.mode == SessionMode::csi) {
      matchmaker_.add_subgroup(g.id, at);
      surrogates_.emplace(g.id, SurrogateState{surrogate_for(g.id), g.id, {}, {}, at});
    }
  }
  if (placed.size() != participants_.size())
    throw ContractViolation("not every participant was placed");
  phase_ = Phase::running;
  started_at_ = at;
}

void Session::open_subgroup(const SubgroupId& id, const std::vector<ParticipantId>& members,
                            Millis at) {
  Subgroup g{id, {members.begin(), members.end()}, surrogate_for(id)};
  for (const auto& m : members) participants_.at(m).subgroup = id;
  subgroups_.push_back(std::move(g));
  matchmaker_.add_subgroup(id, at);
  surrogates_.emplace(id, SurrogateState{surrogate_for(id), id, {}, {}, at});
}

void Session::apply_joined(const ParticipantJoined& joined, Millis at) {
  const Participant& p = joined.participant;
  if (p.id.value != sequential_id("p", participants_.size() + 1, 4))
    throw ContractViolation("participant id out of order: " + p.id.value);
  if (phase_ == Phase::ended) throw ContractViolation("join after end");
  if (phase_ == Phase::lobby) {
    if (p.subgroup) throw ContractViolation("lobby join with a subgroup");
    participants_.emplace(p.id, Participant{p.id, p.display_name, std::nullopt});
    return;
  }
  participants_.emplace(p.id, Participant{p.id, p.display_name, std::nullopt});
  if (config_.mode == SessionMode::single_room) {
    if (p.subgroup != subgroups_.front().id) throw ContractViolation("single room join mismatch");
    subgroups_.front().members.insert(p.id);
    participants_.at(p.id).subgroup = p.subgroup;
    return;
  }
  const SubgroupId next = next_subgroup_id();
  const auto admission = allocator_.admit(p.id, subgroups_, next);
  if (admission.subgroup != p.subgroup)
    throw ContractViolation("late join placement differs from the allocation rule");
  if (!admission.subgroup) {
    queued_.push_back(p.id);
    return;
  }
  if (*admission.subgroup == next) {
    open_subgroup(next, admission.opened_with, at);
    queued_.clear();
    return;
  }
  auto it = std::find_if(subgroups_.begin(), subgroups_.end(),
                         [&](const Subgroup& g) { return g.id == *admission.subgroup; });
  it->members.insert(p.id);
  participants_.at(p.id).subgroup = it->id;
}

void Session::apply_posted(const MessagePosted& posted) {
  const ChatMessage& m = posted.message;
  if (phase_ != Phase::running) throw ContractViolation("message outside running phase");
  if (m.id.value != sequential_id("m", message_count_ + 1, 6))
    throw ContractViolation("message id out of order: " + m.id.value);
  if (!provenance_consistent(m)) throw ContractViolation("inconsistent provenance");
  const Subgroup* g = subgroup(m.subgroup);
  if (g == nullptr) throw ContractViolation("message to unknown subgroup");
  if (m.is_human()) {
    const auto& author = std::get<ParticipantId>(m.author);
    if (!g->members.contains(author)) throw ContractViolation("author not in subgroup");
  } else if (!g->surrogate || std::get<SurrogateId>(m.author) != *g->surrogate) {
    throw ContractViolation("relay not authored by the receiving surrogate");
  }
  ++message_count_;
  if (m.is_human()) taxonomy_.record_assertion(m);
  if (config_.mode != SessionMode::csi) return;
  matchmaker_.observe(m.subgroup, tokenize(m.text));
  if (m.is_human()) {
    observe(surrogates_.at(m.subgroup), m);
  } else {
    ++relay_counts_[m.subgroup];
  }
}

// Live operations.

JoinResult Session::join(std::string display_name, Millis now) {
  now = clamp_time(now);
  if (phase_ == Phase::ended)
    throw SessionError(SessionError::Code::wrong_phase, "session has ended");
  display_name = trim(display_name);
  ParticipantId id(sequential_id("p", participants_.size() + 1, 4));
  if (display_name.empty()) display_name = "Participant " + id.value.substr(2);
  Participant p{id, display_name, std::nullopt};

  if (phase_ == Phase::running) {
    if (config_.mode == SessionMode::single_room) {
      p.subgroup = subgroups_.front().id;
    } else {
      LateJoinAllocator probe = allocator_;
      p.subgroup = probe.admit(id, subgroups_, next_subgroup_id()).subgroup;
    }
  }
  const std::size_t before = subgroups_.size();
  emit(now, ParticipantJoined{p});

  JoinResult result{participants_.at(id), {}};
  if (subgroups_.size() > before) {
    for (const auto& m : subgroups_.back().members) result.placed.push_back(participants_.at(m));
  } else if (result.participant.subgroup) {
    result.placed.push_back(result.participant);
  }
  return result;
}

void Session::start(Millis now) {
  now = clamp_time(now);
  if (phase_ != Phase::lobby)
    throw SessionError(SessionError::Code::wrong_phase, "session already started");
  std::vector<ParticipantId> roster;
  for (const auto& [id, _] : participants_) roster.push_back(id);

  SessionStarted started{config_, {}, topology_};
  if (config_.mode == SessionMode::single_room) {
    if (roster.empty())
      throw SessionError(SessionError::Code::roster_too_small, "no participants have joined");
    started.subgroups.push_back(
        Subgroup{SubgroupId("g-001"), {roster.begin(), roster.end()}, std::nullopt});
  } else {
    PartitionPlan plan;
    try {
      plan = partition(roster, config_.target_subgroup_size, config_.random_seed);
    } catch (const RosterTooSmall& e) {
      throw SessionError(SessionError::Code::roster_too_small, e.what());
    }
    for (std::size_t i = 0; i < plan.subgroups.size(); ++i) {
      SubgroupId gid(sequential_id("g", i + 1, 3));
      started.subgroups.push_back(Subgroup{
          gid, {plan.subgroups[i].begin(), plan.subgroups[i].end()}, surrogate_for(gid)});
    }
  }
  emit(now, std::move(started));
}

Broadcast Session::post_message(const ParticipantId& author, std::string text, Millis now) {
  now = clamp_time(now);
  if (phase_ != Phase::running)
    throw SessionError(SessionError::Code::wrong_phase, "session is not running");
  const Participant* p = participant(author);
  if (p == nullptr)
    throw SessionError(SessionError::Code::unknown_participant, "unknown participant");
  if (!p->subgroup)
    throw SessionError(SessionError::Code::not_assigned, "waiting for a subgroup assignment");
  text = trim(text);
  if (text.empty()) throw SessionError(SessionError::Code::empty_message, "empty message");
  if (text.size() > kMaxMessageLength)
    throw SessionError(SessionError::Code::message_too_long, "message too long");

  const SubgroupId where = *p->subgroup;
  auto message = make_human_message(MessageId(sequential_id("m", message_count_ + 1, 6)), where,
                                    author, now, std::move(text));
  emit(now, MessagePosted{message});
  return Broadcast{std::move(message), members_except(where, author)};
}

std::vector<ParticipantId> Session::members_except(const SubgroupId& id,
                                                   const std::optional<ParticipantId>& skip) const {
  std::vector<ParticipantId> out;
  if (const Subgroup* g = subgroup(id))
    for (const auto& m : g->members)
      if (!skip || m != *skip) out.push_back(m);
  return out;
}

std::vector<SubgroupId> Session::distillations_due(Millis now) const {
  std::vector<SubgroupId> due;
  if (phase_ != Phase::running) return due;
  for (const auto& [id, state] : surrogates_)
    if (distill_due(state, policy_, now)) due.push_back(id);
  return due;
}

const SurrogateState& Session::surrogate_state(const SubgroupId& subgroup) const {
  return surrogates_.at(subgroup);
}

bool Session::accept_draft(const SubgroupId& source, const InsightDraft& draft) const {
  TokenSet tokens(tokenize(draft.text));
  if (tokens.empty()) return false;
  return !matchmaker_.pool().is_near_duplicate(tokens, source);
}

TickOutcome Session::scheduler_tick(Millis now) { return run_tick(now, nullptr); }

TickOutcome Session::scheduler_tick(Millis now, const DraftMap& drafts) {
  return run_tick(now, &drafts);
}

TickOutcome Session::run_tick(Millis now, const DraftMap* drafts) {
  now = clamp_time(now);
  TickOutcome out;
  if (phase_ != Phase::running) return out;

  if (config_.mode == SessionMode::csi) {
    for (const auto& source : distillations_due(now)) {
      const SurrogateState& state = surrogates_.at(source);
      std::optional<InsightDraft> draft;
      if (drafts == nullptr) {
        draft = distiller_->distill(state, policy_, [&](const InsightDraft& d) {
          return accept_draft(source, d);
        });
      } else if (auto it = drafts->find(source); it != drafts->end()) {
        draft = it->second;
      }
      if (!draft || !accept_draft(source, *draft)) continue;
      // Sources must be messages this surrogate is still holding.
      const bool sources_ok =
          !draft->source_message_ids.empty() &&
          std::all_of(draft->source_message_ids.begin(), draft->source_message_ids.end(),
                      [&](const MessageId& id) {
                        return std::any_of(state.observation_buffer.begin(),
                                           state.observation_buffer.end(),
                                           [&](const ChatMessage& m) { return m.id == id; });
                      });
      if (!sources_ok) continue;
      Insight insight{InsightId(sequential_id("i", insights_.size() + 1, 5)), source,
                      draft->text, draft->source_message_ids, now, {}};
      emit(now, InsightCreated{insight});
      out.created.push_back(std::move(insight));
    }

    if (tick_observer_) tick_observer_(*this, now);

    out.deliveries = matchmaker_.plan_tick(now);
    for (const auto& d : out.deliveries) emit(now, InsightDelivered{d.insight_id, d.receiver});
    for (const auto& d : out.deliveries) {
      const Insight& insight = insights_.at(d.insight_id);
      const Subgroup* g = subgroup(d.receiver);
      const std::uint64_t seed = config_.random_seed + relay_counts_[d.receiver];
      auto relay = render_insight(insight, seed, *g->surrogate, d.receiver,
                                  MessageId(sequential_id("m", message_count_ + 1, 6)), now);
      emit(now, MessagePosted{relay});
      out.relays.push_back(Broadcast{std::move(relay), members_except(d.receiver, std::nullopt)});
    }
  } else if (tick_observer_) {
    tick_observer_(*this, now);
  }

  if (due_to_end(now)) out.ended = end(now, "duration");
  return out;
}

bool Session::due_to_end(Millis now) const {
  return phase_ == Phase::running && started_at_ && now - *started_at_ >= config_.duration;
}

Millis Session::remaining(Millis now) const {
  if (phase_ == Phase::lobby) return config_.duration;
  if (phase_ == Phase::ended || !started_at_) return Millis{0};
  return std::max(Millis{0}, config_.duration - (now - *started_at_));
}

bool Session::end(Millis now, const std::string& reason) {
  now = clamp_time(now);
  if (phase_ == Phase::ended) return false;
  emit(now, SessionEnded{reason});
  return true;
}

void Session::submit_survey(const ParticipantId& participant_id,
                            const std::array<survey::Method, survey::kQuestionCount>& answers) {
  if (phase_ != Phase::ended)
    throw SessionError(SessionError::Code::wrong_phase, "surveys open after the session ends");
  if (participant(participant_id) == nullptr)
    throw SessionError(SessionError::Code::unknown_participant, "unknown participant");
  const bool seen = std::any_of(surveys_.begin(), surveys_.end(), [&](const auto& r) {
    return r.respondent_id == participant_id.value;
  });
  if (seen) throw SessionError(SessionError::Code::already_submitted, "survey already submitted");
  surveys_.push_back(survey::SurveyResponse{participant_id.value, answers});
}

const Participant* Session::participant(const ParticipantId& id) const {
  auto it = participants_.find(id);
  return it == participants_.end() ? nullptr : &it->second;
}

const Subgroup* Session::subgroup(const SubgroupId& id) const {
  auto it = std::find_if(subgroups_.begin(), subgroups_.end(),
                         [&](const Subgroup& g) { return g.id == id; });
  return it == subgroups_.end() ? nullptr : &*it;
}

Session Session::replay(std::span<const SessionEvent> log, const SessionConfig& fallback_config) {
  SessionConfig config = fallback_config;
  RoutingTopology topology = RoutingTopology::fully_connected;
  for (const auto& e : log) {
    if (const auto* s = std::get_if<SessionStarted>(&e.payload)) {
      config = s->config;
      topology = s->topology;
      break;
    }
  }
  Session session(config, topology);
  for (const auto& e : log) {
    if (e.sequence_no != session.events_.size() + 1)
      throw std::runtime_error("replay: expected seq " +
                               std::to_string(session.events_.size() + 1) + ", found " +
                               std::to_string(e.sequence_no));
    if (!session.events_.empty() && e.wall_time < session.events_.back().wall_time)
      throw std::runtime_error("replay: seq " + std::to_string(e.sequence_no) +
                               " goes back in time");
    try {
      session.apply(e);
    } catch (const std::exception& ex) {
      throw std::runtime_error("replay: seq " + std::to_string(e.sequence_no) + ": " + ex.what());
    }
    session.events_.push_back(e);
  }
  return session;
}

std::string Session::snapshot_json() const {
  json doc;
  doc["config"] = config_;
  doc["topology"] = to_string(topology_);
  doc["phase"] = to_string(phase_);
  doc["started_at"] = started_at_ ? json(started_at_->count()) : json(nullptr);
  doc["event_count"] = events_.size();
  doc["message_count"] = message_count_;
  json people = json::array();
  for (const auto& [_, p] : participants_) people.push_back(p);
  doc["participants"] = people;
  doc["subgroups"] = subgroups_;
  doc["queued"] = queued_;
  json allocator_queue = json::array();
  for (const auto& q : allocator_.queue()) allocator_queue.push_back(q);
  doc["allocator_queue"] = allocator_queue;
  json surrogates = json::array();
  for (const auto& [id, s] : surrogates_) {
    json buffer = json::array();
    for (const auto& m : s.observation_buffer) buffer.push_back(m.id);
    surrogates.push_back({{"surrogate_id", s.surrogate_id},
                          {"subgroup_id", s.subgroup_id},
                          {"buffer", buffer},
                          {"covered", s.covered_message_ids},
                          {"last_distilled_at", s.last_distilled_at.count()},
                          {"relays", relay_counts_.contains(id) ? relay_counts_.at(id) : 0}});
  }
  doc["surrogates"] = surrogates;
  json routing = json::array();
  for (const auto& [id, r] : matchmaker_.routing_states()) {
    json profile = json::object();
    for (const auto& [token, n] : r.profile.counts()) profile[token] = n;
    routing.push_back({{"subgroup_id", id},
                       {"last_delivery_at", r.last_delivery_at.count()},
                       {"profile_messages", r.profile.message_count()},
                       {"profile", profile},
                       {"received", r.received_insight_ids}});
  }
  doc["routing"] = routing;
  json pool = json::array();
  for (const auto& e : matchmaker_.pool().entries()) pool.push_back(e.insight);
  doc["pool"] = pool;
  json insights = json::array();
  for (const auto& [_, i] : insights_) insights.push_back(i);
  doc["insights"] = insights;
  json ideas = json::array();
  for (const auto& idea : taxonomy_.ideas())
    ideas.push_back({{"idea_id", idea.id},
                     {"mentions", idea.mention_message_ids},
                     {"subgroups", idea.subgroups_mentioning}});
  doc["ideas"] = ideas;
  doc["stance_links"] = taxonomy_.stance_links().size();
  return doc.dump();
}

}  // namespace csi
