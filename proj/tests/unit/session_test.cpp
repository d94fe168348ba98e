#include <gtest/gtest.h>

#include <sstream>

#include "csi/event_log.hpp"
#include "csi/metrics.hpp"
#include "csi/serialize.hpp"
#include "csi/session.hpp"

using namespace csi;

namespace {

SessionConfig small_config() {
  SessionConfig c;
  c.session_id = SessionId("s-test");
  c.duration = Millis{600'000};
  c.starvation_threshold = Millis{10'000};
  c.distill_every_messages = 2;
  c.distill_min_tokens = 2;
  c.random_seed = 3;
  return c;
}

Session running_session(std::size_t people, SessionConfig c = small_config()) {
  Session s(c);
  for (std::size_t i = 0; i < people; ++i) s.join("user " + std::to_string(i), Millis{0});
  s.start(Millis{0});
  return s;
}

SessionError::Code code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SessionError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no SessionError";
  return SessionError::Code::invalid_config;
}

// One message per participant round-robin so every subgroup has talk.
void chatter(Session& s, long long at, const std::vector<std::string>& lines) {
  std::size_t i = 0;
  for (const auto& [pid, p] : s.participants()) {
    if (!p.subgroup) continue;
    s.post_message(pid, lines[i % lines.size()] + " " + p.subgroup->value, Millis{at});
    ++i;
  }
}

}  // namespace

TEST(SessionConfig, ValidationListsProblems) {
  SessionConfig c;
  c.target_subgroup_size = 9;
  c.novelty_floor = 2.0;
  c.tick_interval = Millis{0};
  EXPECT_GE(validate_config(c).size(), 3u);
  EXPECT_EQ(code_of([&] { Session s(c); }), SessionError::Code::invalid_config);
  EXPECT_TRUE(validate_config(SessionConfig{}).empty());
}

TEST(Session, LobbyJoinAndStartPartitions) {
  Session s(small_config());
  const auto j = s.join("  Ada  ", Millis{0});
  EXPECT_EQ(j.participant.id, ParticipantId("p-0001"));
  EXPECT_EQ(j.participant.display_name, "Ada");
  EXPECT_FALSE(j.participant.subgroup);
  EXPECT_TRUE(j.placed.empty());
  EXPECT_EQ(s.join("", Millis{0}).participant.display_name, "Participant 0002");
  for (int i = 0; i < 8; ++i) s.join("x", Millis{0});
  s.start(Millis{100});
  EXPECT_EQ(s.phase(), Phase::running);
  ASSERT_EQ(s.subgroups().size(), 2u);
  for (const auto& g : s.subgroups()) {
    EXPECT_EQ(g.members.size(), 5u);
    EXPECT_EQ(g.surrogate, SurrogateId("a" + g.id.value.substr(1)));
  }
  for (const auto& [_, p] : s.participants()) EXPECT_TRUE(p.subgroup);
  EXPECT_EQ(code_of([&] { s.start(Millis{200}); }), SessionError::Code::wrong_phase);
}

TEST(Session, RosterTooSmall) {
  Session s(small_config());
  for (int i = 0; i < 3; ++i) s.join("x", Millis{0});
  EXPECT_EQ(code_of([&] { s.start(Millis{0}); }), SessionError::Code::roster_too_small);
  EXPECT_EQ(s.phase(), Phase::lobby);
  EXPECT_EQ(s.events().size(), 3u);
}

TEST(Session, PostValidation) {
  Session lobby(small_config());
  const auto p = lobby.join("x", Millis{0}).participant.id;
  EXPECT_EQ(code_of([&] { lobby.post_message(p, "hi", Millis{0}); }),
            SessionError::Code::wrong_phase);

  auto s = running_session(10);
  const ParticipantId a("p-0001");
  EXPECT_EQ(code_of([&] { s.post_message(ParticipantId("p-9999"), "hi", Millis{1}); }),
            SessionError::Code::unknown_participant);
  EXPECT_EQ(code_of([&] { s.post_message(a, "   ", Millis{1}); }),
            SessionError::Code::empty_message);
  EXPECT_EQ(code_of([&] { s.post_message(a, std::string(kMaxMessageLength + 1, 'x'), Millis{1}); }),
            SessionError::Code::message_too_long);
  const auto b = s.post_message(a, "  hello there  ", Millis{1});
  EXPECT_EQ(b.message.text, "hello there");
  EXPECT_EQ(b.message.id, MessageId("m-000001"));
  EXPECT_TRUE(b.message.is_human());
  // Recipients: the rest of the author's subgroup.
  const Subgroup* g = s.subgroup(*s.participant(a)->subgroup);
  EXPECT_EQ(b.recipients.size(), g->members.size() - 1);
  for (const auto& r : b.recipients) {
    EXPECT_NE(r, a);
    EXPECT_TRUE(g->members.contains(r));
  }
}

TEST(Session, TickDistillsRoutesAndRelays) {
  auto s = running_session(10);
  chatter(s, 1'000, {"turn cones into planters", "paint cones like lighthouses"});
  const auto out = s.scheduler_tick(Millis{10'000});
  EXPECT_EQ(out.created.size(), 2u);
  ASSERT_EQ(out.deliveries.size(), 2u);
  ASSERT_EQ(out.relays.size(), 2u);
  for (std::size_t i = 0; i < out.relays.size(); ++i) {
    const auto& relay = out.relays[i].message;
    EXPECT_FALSE(relay.is_human());
    EXPECT_EQ(relay.subgroup, out.deliveries[i].receiver);
    const Insight& src = s.insights().at(*relay.relayed_from);
    EXPECT_NE(src.source_subgroup, relay.subgroup);
    EXPECT_TRUE(relay.text.ends_with(src.text));
    EXPECT_EQ(out.relays[i].recipients.size(), s.subgroup(relay.subgroup)->members.size());
  }
  EXPECT_FALSE(out.ended);
  // Not starving any more: nothing new until the threshold passes again.
  EXPECT_TRUE(s.scheduler_tick(Millis{15'000}).deliveries.empty());
}

TEST(Session, DurationEndsSession) {
  auto s = running_session(10);
  auto out = s.scheduler_tick(Millis{599'999});
  EXPECT_FALSE(out.ended);
  out = s.scheduler_tick(Millis{600'000});
  EXPECT_TRUE(out.ended);
  EXPECT_EQ(s.phase(), Phase::ended);
  EXPECT_EQ(std::get<SessionEnded>(s.events().back().payload).reason, "duration");
  EXPECT_FALSE(s.end(Millis{600'001}));
  EXPECT_EQ(s.remaining(Millis{700'000}), Millis{0});
}

TEST(Session, ManualEndIsIdempotent) {
  auto s = running_session(8);
  EXPECT_TRUE(s.end(Millis{5}));
  const auto n = s.events().size();
  EXPECT_FALSE(s.end(Millis{6}));
  EXPECT_EQ(s.events().size(), n);
  EXPECT_EQ(code_of([&] { s.join("late", Millis{7}); }), SessionError::Code::wrong_phase);
  EXPECT_TRUE(s.scheduler_tick(Millis{8}).deliveries.empty());
}

TEST(Session, LateJoinFillsThenOpensSubgroup) {
  auto s = running_session(14);  // 14 / 5 -> 3 subgroups of 5,5,4
  auto j = s.join("late", Millis{10});
  ASSERT_TRUE(j.participant.subgroup);
  EXPECT_EQ(s.subgroup(*j.participant.subgroup)->members.size(), 5u);
  for (int i = 0; i < 6; ++i) s.join("fill", Millis{10});  // every subgroup to 7
  for (const auto& g : s.subgroups()) EXPECT_EQ(g.members.size(), 7u);
  for (int i = 0; i < 3; ++i) {
    j = s.join("queued", Millis{20});
    EXPECT_FALSE(j.participant.subgroup);
    EXPECT_EQ(code_of([&] { s.post_message(j.participant.id, "hi", Millis{20}); }),
              SessionError::Code::not_assigned);
  }
  EXPECT_EQ(s.join_queue().size(), 3u);
  j = s.join("fourth", Millis{30});
  ASSERT_TRUE(j.participant.subgroup);
  EXPECT_EQ(*j.participant.subgroup, SubgroupId("g-004"));
  EXPECT_EQ(j.placed.size(), 4u);
  EXPECT_TRUE(s.join_queue().empty());
  EXPECT_TRUE(s.matchmaker().routing_states().contains(SubgroupId("g-004")));
  EXPECT_TRUE(s.surrogates().contains(SubgroupId("g-004")));
}

TEST(Session, SingleRoomHasNoSurrogatesOrInsights) {
  SessionConfig c = small_config();
  c.mode = SessionMode::single_room;
  Session s(c);
  EXPECT_EQ(code_of([&] { s.start(Millis{0}); }), SessionError::Code::roster_too_small);
  for (int i = 0; i < 3; ++i) s.join("x", Millis{0});
  s.start(Millis{0});
  ASSERT_EQ(s.subgroups().size(), 1u);
  EXPECT_FALSE(s.subgroups()[0].surrogate);
  chatter(s, 10, {"turn cones into planters"});
  chatter(s, 20, {"paint cones like lighthouses"});
  const auto out = s.scheduler_tick(Millis{60'000});
  EXPECT_TRUE(out.created.empty());
  EXPECT_TRUE(out.deliveries.empty());
  EXPECT_TRUE(s.insights().empty());
  const auto late = s.join("late", Millis{70'000});
  EXPECT_EQ(late.participant.subgroup, SubgroupId("g-001"));
  // The idea index still runs.
  EXPECT_FALSE(s.taxonomy().ideas().empty());
}

TEST(Session, ExternalDraftsAreChecked) {
  auto s = running_session(10);
  chatter(s, 1'000, {"turn cones into planters"});
  chatter(s, 2'000, {"paint cones like lighthouses"});
  const SubgroupId g1("g-001"), g2("g-002");
  const auto& buffer = s.surrogate_state(g1).observation_buffer;
  ASSERT_FALSE(buffer.empty());
  DraftMap drafts;
  drafts[g1] = InsightDraft{"a summary of cones", {buffer.front().id}};
  drafts[g2] = InsightDraft{"made up", {MessageId("m-999999")}};  // not in the buffer
  const auto out = s.scheduler_tick(Millis{10'000}, drafts);
  ASSERT_EQ(out.created.size(), 1u);
  EXPECT_EQ(out.created[0].source_subgroup, g1);
  EXPECT_EQ(out.created[0].text, "a summary of cones");
}

TEST(Session, SurveysAfterEndOnly) {
  auto s = running_session(8);
  std::array<survey::Method, 7> answers;
  answers.fill(survey::Method::csi);
  EXPECT_EQ(code_of([&] { s.submit_survey(ParticipantId("p-0001"), answers); }),
            SessionError::Code::wrong_phase);
  s.end(Millis{1});
  s.submit_survey(ParticipantId("p-0001"), answers);
  EXPECT_EQ(code_of([&] { s.submit_survey(ParticipantId("p-0001"), answers); }),
            SessionError::Code::already_submitted);
  EXPECT_EQ(code_of([&] { s.submit_survey(ParticipantId("p-0042"), answers); }),
            SessionError::Code::unknown_participant);
  EXPECT_EQ(s.surveys().size(), 1u);
}

TEST(Session, TimeNeverGoesBackwards) {
  auto s = running_session(8);
  s.post_message(ParticipantId("p-0001"), "first", Millis{5'000});
  s.post_message(ParticipantId("p-0002"), "second", Millis{4'000});
  EXPECT_EQ(s.events().back().wall_time, Millis{5'000});
}

TEST(Session, EventsAreGaplessAndListenerSeesEach) {
  Session s(small_config());
  std::vector<std::uint64_t> seen;
  s.set_listener([&](const SessionEvent& e) { seen.push_back(e.sequence_no); });
  for (int i = 0; i < 10; ++i) s.join("x", Millis{0});
  s.start(Millis{0});
  chatter(s, 1'000, {"turn cones into planters"});
  s.scheduler_tick(Millis{10'000});
  s.end(Millis{11'000});
  ASSERT_EQ(seen.size(), s.events().size());
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i + 1);
}

TEST(Replay, ReconstructsIdenticalState) {
  auto s = running_session(23);
  for (int round = 0; round < 12; ++round) {
    chatter(s, round * 10'000 + 1, {"turn cones into planters " + std::to_string(round),
                                    "paint cones like lighthouses", "cones as hats for giants"});
    s.scheduler_tick(Millis{round * 10'000 + 5'000});
    if (round == 6) s.join("late", Millis{round * 10'000 + 6'000});
  }
  s.end(Millis{200'000});
  const auto copy = Session::replay(s.events());
  EXPECT_EQ(copy.snapshot_json(), s.snapshot_json());
  EXPECT_EQ(copy.events(), s.events());

  // Through the on-disk format too.
  std::istringstream in(format_log(s.events()));
  const auto parsed = read_log(in);
  EXPECT_EQ(parsed, s.events());
  EXPECT_EQ(Session::replay(parsed).snapshot_json(), s.snapshot_json());
}

TEST(Replay, RejectsTamperedLogs) {
  auto s = running_session(10);
  chatter(s, 1'000, {"turn cones into planters"});
  s.scheduler_tick(Millis{10'000});
  auto log = s.events();

  auto gap = log;
  gap.erase(gap.begin() + 3);
  EXPECT_THROW(Session::replay(gap), std::runtime_error);

  auto back = log;
  back.back().wall_time = Millis{0};
  EXPECT_THROW(Session::replay(back), std::runtime_error);

  // A relay attributed to a human.
  auto forged = log;
  for (auto& e : forged)
    if (auto* p = std::get_if<MessagePosted>(&e.payload); p && p->message.is_relay())
      p->message.author = ParticipantId("p-0001");
  EXPECT_THROW(Session::replay(forged), std::runtime_error);

  // A delivery back to the insight's own source.
  auto self = log;
  std::map<InsightId, SubgroupId> source;
  for (auto& e : self) {
    if (const auto* c = std::get_if<InsightCreated>(&e.payload))
      source[c->insight.id] = c->insight.source_subgroup;
    if (auto* d = std::get_if<InsightDelivered>(&e.payload)) d->receiver = source.at(d->insight_id);
  }
  EXPECT_THROW(Session::replay(self), std::runtime_error);
}

TEST(EventLog, LineRoundTripForEveryPayload) {
  auto s = running_session(10);
  chatter(s, 1'000, {"turn cones into planters"});
  s.scheduler_tick(Millis{10'000});
  s.end(Millis{11'000});
  std::set<std::string> types;
  for (const auto& e : s.events()) {
    const std::string line = to_log_line(e);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(parse_log_line(line), e);
    const auto doc = json::parse(line);
    EXPECT_EQ(doc["seq"], e.sequence_no);
    types.insert(doc["type"].get<std::string>());
  }
  EXPECT_EQ(types, (std::set<std::string>{"session_started", "participant_joined",
                                          "message_posted", "insight_created",
                                          "insight_delivered", "session_ended"}));
}

TEST(EventLog, RejectsMalformedInput) {
  EXPECT_THROW(parse_log_line("not json"), LogFormatError);
  EXPECT_THROW(parse_log_line(R"({"seq":1,"type":"nope","wall_time":0})"), LogFormatError);
  std::istringstream gap(to_log_line(SessionEvent{2, Millis{0}, SessionEnded{"manual"}}) + "\n");
  EXPECT_THROW(read_log(gap), LogFormatError);
}

TEST(Metrics, GiniMatchesPairwiseFormula) {
  EXPECT_DOUBLE_EQ(gini(std::vector<std::size_t>{}), 0.0);
  EXPECT_DOUBLE_EQ(gini(std::vector<std::size_t>{0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini(std::vector<std::size_t>{4, 4, 4, 4}), 0.0);
  for (std::size_t n = 2; n < 12; ++n) {
    std::vector<std::size_t> one(n, 0);
    one[0] = 10;
    EXPECT_NEAR(gini(one), static_cast<double>(n - 1) / static_cast<double>(n), 1e-12);
  }
  const std::vector<std::size_t> x{1, 2, 3, 7, 0};
  double sum = 0, mean = 0;
  for (auto a : x) {
    mean += static_cast<double>(a);
    for (auto b : x) sum += std::abs(static_cast<double>(a) - static_cast<double>(b));
  }
  mean /= static_cast<double>(x.size());
  EXPECT_NEAR(gini(x), sum / (2.0 * 25.0 * mean), 1e-12);
}

TEST(Metrics, ParticipationAndPropagation) {
  auto s = running_session(10);
  s.post_message(ParticipantId("p-0001"), "turn cones into planters", Millis{1'000});
  s.post_message(ParticipantId("p-0001"), "paint cones like lighthouses", Millis{2'000});
  s.scheduler_tick(Millis{10'000});
  const auto part = participation_metrics(s.events());
  ASSERT_EQ(part.per_participant.size(), 10u);
  EXPECT_EQ(part.per_participant[0].messages, 2u);
  EXPECT_EQ(part.spread, 2u);
  EXPECT_NEAR(part.gini, 0.9, 1e-12);

  const auto prop = propagation_metrics(s.events());
  ASSERT_EQ(prop.size(), 1u);
  EXPECT_EQ(prop[0].eligible_receivers, 1u);
  EXPECT_EQ(prop[0].coverage(), 1u);
  EXPECT_EQ(prop[0].latency_to(1), Millis{0});
  EXPECT_EQ(prop[0].time_to_full_coverage(), Millis{0});
  EXPECT_FALSE(prop[0].latency_to(2));
  EXPECT_EQ(subgroups_in_log(s.events()).size(), 2u);
}
