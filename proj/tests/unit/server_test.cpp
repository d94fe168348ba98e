#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "csi/event_log.hpp"
#include "csi/server.hpp"
#include "csi/transport.hpp"
#include "csi/wire.hpp"

using namespace csi;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

// Chat client with a background reader so tests can wait with a timeout.
class Client {
 public:
  explicit Client(std::unique_ptr<RecordStream> stream) : stream_(std::move(stream)) {
    reader_ = std::thread([this] {
      while (auto line = stream_->read_record()) {
        std::lock_guard lock(mutex_);
        inbox_.push_back(*line);
        cv_.notify_all();
      }
      std::lock_guard lock(mutex_);
      gone_ = true;
      cv_.notify_all();
    });
  }
  ~Client() { close(); }

  void close() {
    if (stream_) stream_->shutdown();
    if (reader_.joinable()) reader_.join();
  }

  void send(const wire::ClientRecord& r) { ASSERT_TRUE(stream_->write_record(wire::encode(r))); }
  void send_raw(const std::string& line) { ASSERT_TRUE(stream_->write_record(line)); }

  std::optional<wire::ServerRecord> next(std::chrono::milliseconds timeout = 5000ms) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || gone_; })) return std::nullopt;
    if (inbox_.empty()) return std::nullopt;
    const std::string line = inbox_.front();
    inbox_.pop_front();
    return wire::parse_server_record(line);
  }

  template <class T>
  T expect() {
    auto r = next();
    if (!r) {
      ADD_FAILURE() << "timed out waiting for a record";
      return T{};
    }
    if (!std::holds_alternative<T>(*r)) {
      ADD_FAILURE() << "unexpected record " << wire::encode(*r);
      return T{};
    }
    return std::get<T>(*r);
  }

  // Skips system records.
  template <class T>
  T expect_skipping_system() {
    for (;;) {
      auto r = next();
      if (!r) {
        ADD_FAILURE() << "timed out waiting for a record";
        return T{};
      }
      if (std::holds_alternative<wire::System>(*r)) continue;
      if (!std::holds_alternative<T>(*r)) {
        ADD_FAILURE() << "unexpected record " << wire::encode(*r);
        return T{};
      }
      return std::get<T>(*r);
    }
  }

  std::size_t pending() {
    std::lock_guard lock(mutex_);
    return inbox_.size();
  }

 private:
  std::unique_ptr<RecordStream> stream_;
  std::thread reader_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> inbox_;
  bool gone_ = false;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("csi-server-test-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    ServerOptions options;
    options.data_dir = dir_;
    options.auto_tick = false;
    options.clock = [this] { return Millis{clock_.load()}; };
    options.defaults.task_prompt = "List uses for a traffic cone";
    server_ = std::make_unique<Server>(options);
    server_->start();
    http_ = std::make_unique<httplib::Client>("127.0.0.1", server_->http_port());
  }

  void TearDown() override {
    server_->stop();
    std::filesystem::remove_all(dir_);
  }

  std::unique_ptr<Client> tcp() {
    auto s = connect_record_stream("127.0.0.1", server_->chat_port());
    EXPECT_TRUE(s);
    return std::make_unique<Client>(std::move(s));
  }
  std::unique_ptr<Client> ws() {
    auto s = connect_websocket_stream("127.0.0.1", server_->chat_port(), "/chat");
    EXPECT_TRUE(s);
    return std::make_unique<Client>(std::move(s));
  }

  std::string create(const json& patch = json::object()) {
    auto res = http_->Post("/sessions", patch.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["session_id"].get<std::string>();
  }

  std::atomic<long long> clock_{1'000'000};
  std::filesystem::path dir_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> http_;
};

// Joined client plus what it learned from its welcome.
struct Member {
  std::unique_ptr<Client> client;
  std::string participant_id;
};

Member join(std::unique_ptr<Client> c, const std::string& sid, const std::string& name) {
  c->send(wire::Join{sid, name, "", ""});
  const auto w = c->expect<wire::Welcome>();
  EXPECT_FALSE(w.subgroup_id);
  const auto s = c->expect<wire::System>();
  EXPECT_EQ(s.phase, "lobby");
  return Member{std::move(c), w.participant_id.value};
}

std::vector<std::string> subgroup_order(const std::vector<SessionEvent>& log,
                                        const std::string& subgroup) {
  std::vector<std::string> ids;
  for (const auto& e : log)
    if (const auto* p = std::get_if<MessagePosted>(&e.payload))
      if (p->message.subgroup.value == subgroup) ids.push_back(p->message.id.value);
  return ids;
}

}  // namespace

TEST(Transport, WebSocketAcceptKey) {
  // Example handshake from RFC 6455.
  EXPECT_EQ(websocket_accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST_F(ServerTest, ControlApiLifecycle) {
  auto res = http_->Get("/sessions/s-missing");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "unknown_session");

  res = http_->Post("/sessions", R"({"target_subgroup_size": 12})", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "invalid_config");
  res = http_->Post("/sessions", "{nope", "application/json");
  EXPECT_EQ(res->status, 400);

  const std::string sid = create({{"duration", 60}});
  EXPECT_TRUE(sid.starts_with("s-"));
  res = http_->Get("/sessions/" + sid);
  auto status = json::parse(res->body);
  EXPECT_EQ(status["phase"], "lobby");
  EXPECT_EQ(status["remaining_seconds"], 60);

  res = http_->Post("/sessions/" + sid + "/start");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"], "roster_too_small");

  res = http_->Get("/sessions/" + sid + "/report");
  EXPECT_EQ(res->status, 409);
  res = http_->Get("/sessions/" + sid + "/survey-results");
  EXPECT_EQ(res->status, 409);

  res = http_->Post("/sessions/" + sid + "/end");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["report_ref"], "/sessions/" + sid + "/report");
  res = http_->Post("/sessions/" + sid + "/end");  // idempotent
  EXPECT_EQ(res->status, 200);

  res = http_->Get("/sessions/" + sid + "/report");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["end_reason"], "manual");
  res = http_->Get("/sessions/" + sid + "/report?format=text");
  EXPECT_EQ(res->status, 200);
  EXPECT_FALSE(res->body.empty());

  res = http_->Get("/sessions/" + sid + "/log");
  std::istringstream in(res->body);
  const auto log = read_log(in);
  EXPECT_EQ(log, server_->event_log(sid));
  EXPECT_TRUE(std::filesystem::exists(server_->log_path(sid)));
  EXPECT_EQ(read_log_file(server_->log_path(sid)), log);
  EXPECT_TRUE(std::filesystem::exists(dir_ / (sid + ".report.json")));
}

TEST_F(ServerTest, RecordErrors) {
  auto c = tcp();
  c->send(wire::Chat{"hello"});
  EXPECT_TRUE(c->expect<wire::Error>().reason.starts_with("not_joined"));
  c->send_raw("{garbage");
  EXPECT_TRUE(c->expect<wire::Error>().reason.starts_with("bad_record"));
  c->send(wire::Join{"s-000000000000", "x", "", ""});
  EXPECT_TRUE(c->expect<wire::Error>().reason.starts_with("unknown_session"));

  const std::string sid = create();
  auto m = join(std::move(c), sid, "Ada");
  m.client->send(wire::Join{sid, "again", "", ""});
  EXPECT_TRUE(m.client->expect<wire::Error>().reason.starts_with("already_joined"));
  m.client->send(wire::Chat{"too early"});
  EXPECT_TRUE(m.client->expect<wire::Error>().reason.starts_with("wrong_phase"));
}

TEST_F(ServerTest, OneSubgroupScreenOrderEqualsLog) {
  const std::string sid = create();
  std::vector<Member> members;
  for (int i = 0; i < 5; ++i)
    members.push_back(join(i == 2 ? ws() : tcp(), sid, "user " + std::to_string(i)));
  auto res = http_->Post("/sessions/" + sid + "/start");
  ASSERT_EQ(res->status, 200);
  std::string subgroup;
  for (auto& m : members) {
    const auto w = m.client->expect<wire::Welcome>();
    ASSERT_TRUE(w.subgroup_id);
    subgroup = w.subgroup_id->value;
    EXPECT_EQ(w.roster.size(), 5u);
    const auto s = m.client->expect<wire::System>();
    EXPECT_EQ(s.phase, "running");
    EXPECT_EQ(s.task_prompt, "List uses for a traffic cone");
  }

  // Interleaved posts from every client, including concurrent bursts.
  std::vector<std::thread> writers;
  for (std::size_t i = 0; i < members.size(); ++i)
    writers.emplace_back([&, i] {
      for (int k = 0; k < 8; ++k)
        members[i].client->send(wire::Chat{"idea " + std::to_string(i) + "." + std::to_string(k)});
    });
  for (auto& t : writers) t.join();

  const auto expected_count = 40u;
  for (auto& m : members) {
    std::vector<std::string> seen;
    while (seen.size() < expected_count) {
      const auto c = m.client->expect<wire::ChatOut>();
      if (c.message_id.value.empty()) break;
      EXPECT_EQ(c.provenance, "original");
      EXPECT_EQ(c.author_kind, "participant");
      seen.push_back(c.message_id.value);
    }
    EXPECT_EQ(seen, subgroup_order(server_->event_log(sid), subgroup));
  }
}

TEST_F(ServerTest, RelaysAreBadgedAndReconnectResumes) {
  const std::string sid =
      create({{"starvation_threshold", 5}, {"distill_every_messages", 1}, {"distill_min_tokens", 2}});
  std::vector<Member> members;
  for (int i = 0; i < 8; ++i) members.push_back(join(tcp(), sid, "user " + std::to_string(i)));
  ASSERT_EQ(http_->Post("/sessions/" + sid + "/start")->status, 200);
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto w = members[i].client->expect<wire::Welcome>();
    by_group[w.subgroup_id->value].push_back(i);
    members[i].client->expect<wire::System>();
  }
  ASSERT_EQ(by_group.size(), 2u);

  // One idea per subgroup, then a tick after the starvation threshold.
  const auto& g1 = by_group.begin()->second;
  const auto& g2 = std::next(by_group.begin())->second;
  members[g1[0]].client->send(wire::Chat{"turn traffic cones into garden planters"});
  members[g2[0]].client->send(wire::Chat{"paint cones to look like lighthouses"});
  for (auto& m : members) m.client->expect<wire::ChatOut>();
  clock_ += 6'000;
  server_->tick(sid);

  for (auto& m : members) {
    const auto relay = m.client->expect_skipping_system<wire::ChatOut>();
    EXPECT_EQ(relay.author_kind, "surrogate");
    EXPECT_EQ(relay.provenance, "relayed");
  }

  // Drop one member of g1, post while they are away, and resume.
  const std::size_t away = g1[1];
  const std::string pid = members[away].participant_id;
  const auto before = subgroup_order(server_->event_log(sid), by_group.begin()->first);
  const std::string last_seen = before.back();
  members[away].client->close();
  std::this_thread::sleep_for(50ms);
  members[g1[0]].client->send(wire::Chat{"while you were away"});
  members[g1[0]].client->expect_skipping_system<wire::ChatOut>();

  auto back = tcp();
  back->send(wire::Join{sid, "", pid, last_seen});
  const auto w = back->expect<wire::Welcome>();
  EXPECT_EQ(w.participant_id.value, pid);
  back->expect<wire::System>();
  const auto missed = back->expect<wire::ChatOut>();
  EXPECT_EQ(missed.text, "while you were away");
  EXPECT_EQ(missed.message_id.value,
            subgroup_order(server_->event_log(sid), by_group.begin()->first).back());

  // Unknown participant ids are refused.
  auto stranger = tcp();
  stranger->send(wire::Join{sid, "", "p-0999", ""});
  EXPECT_TRUE(stranger->expect<wire::Error>().reason.starts_with("unknown_participant"));
}

TEST_F(ServerTest, EndBroadcastsAndCollectsSurveys) {
  const std::string sid = create();
  std::vector<Member> members;
  for (int i = 0; i < 4; ++i) members.push_back(join(tcp(), sid, "user " + std::to_string(i)));
  ASSERT_EQ(http_->Post("/sessions/" + sid + "/start")->status, 200);
  for (auto& m : members) {
    m.client->expect<wire::Welcome>();
    m.client->expect<wire::System>();
  }
  members[0].client->send(wire::Chat{"cones as party hats for giants"});
  for (auto& m : members) m.client->expect<wire::ChatOut>();
  ASSERT_EQ(http_->Post("/sessions/" + sid + "/end")->status, 200);
  for (auto& m : members) {
    EXPECT_EQ(m.client->expect<wire::System>().phase, "ended");
    EXPECT_EQ(m.client->expect<wire::Ended>().report_ref, "/sessions/" + sid + "/report");
  }
  wire::Survey answers;
  answers.answers.fill(survey::Method::csi);
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i == 3) answers.answers[6] = survey::Method::chat;
    members[i].client->send(answers);
    members[i].client->expect<wire::System>();
  }
  members[0].client->send(answers);
  EXPECT_TRUE(members[0].client->expect<wire::Error>().reason.starts_with("already_submitted"));

  auto res = http_->Get("/sessions/" + sid + "/surveys");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(std::count(res->body.begin(), res->body.end(), '\n'), 5);
  EXPECT_TRUE(std::filesystem::exists(dir_ / (sid + ".surveys.csv")));
  res = http_->Get("/sessions/" + sid + "/survey-results");
  ASSERT_EQ(res->status, 200);
  const auto doc = json::parse(res->body);
  EXPECT_EQ(doc["questions"][0]["csi_count"], 4);
  EXPECT_EQ(doc["questions"][6]["csi_count"], 3);

  res = http_->Get("/sessions/" + sid + "/taxonomy");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["ideas"][0]["text"], "cones as party hats for giants");
}

TEST_F(ServerTest, DashboardRankingMatchesOfflineReport) {
  const std::string sid = create();
  std::vector<Member> members;
  for (int i = 0; i < 4; ++i) members.push_back(join(tcp(), sid, "user " + std::to_string(i)));
  http_->Post("/sessions/" + sid + "/start");
  members[0].client->send(wire::Chat{"cones as party hats for giants"});
  members[1].client->send(wire::Chat{"yes love it"});
  members[2].client->send(wire::Chat{"stack cones into a lighthouse tower"});
  members[3].client->expect<wire::Welcome>();
  for (int i = 0; i < 3; ++i) members[3].client->expect_skipping_system<wire::ChatOut>();
  http_->Post("/sessions/" + sid + "/end");
  const auto live = http_->Get("/sessions/" + sid + "/taxonomy")->body;
  const auto stored = http_->Get("/sessions/" + sid + "/report")->body;
  EXPECT_EQ(json::parse(live)["ideas"], json::parse(stored)["ideas"]);
}
