#include "csi/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <deque>
#include <fstream>
#include <future>
#include <iostream>
#include <random>

#include <httplib.h>

#include "csi/event_log.hpp"
#include "csi/llm_distiller.hpp"
#include "csi/report.hpp"
#include "csi/serialize.hpp"
#include "csi/session.hpp"
#include "csi/transport.hpp"
#include "csi/wire.hpp"

namespace csi {

struct Connection {
  int fd = -1;
  std::unique_ptr<RecordStream> stream;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> outbox;
  bool closed = false;
  std::thread reader;
  std::thread writer;
  std::atomic<bool> finished{false};

  // Set once the client has joined; guarded by the owning host's mutex.
  std::shared_ptr<SessionHost> host;
  ParticipantId participant;

  void send(std::string record) {
    {
      std::lock_guard lock(mutex);
      if (closed) return;
      outbox.push_back(std::move(record));
    }
    cv.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mutex);
      closed = true;
    }
    cv.notify_all();
    stream->shutdown();
  }

  void drain() {
    std::unique_lock lock(mutex);
    for (;;) {
      cv.wait(lock, [&] { return closed || !outbox.empty(); });
      while (!outbox.empty()) {
        std::string record = std::move(outbox.front());
        outbox.pop_front();
        lock.unlock();
        const bool ok = stream->write_record(record);
        lock.lock();
        if (!ok) {
          closed = true;
          outbox.clear();
        }
      }
      if (closed) return;
    }
  }
};

struct SessionHost {
  explicit SessionHost(SessionConfig config) : session(std::move(config)) {}

  std::mutex mutex;
  Session session;
  Millis origin{0};
  std::unique_ptr<LogWriter> log;
  std::map<ParticipantId, std::shared_ptr<Connection>> connections;
  std::shared_ptr<LlmDistiller> llm;
  std::optional<std::string> report_json;
  std::optional<std::string> report_text;
  std::filesystem::path survey_path;

  std::thread ticker;
  std::condition_variable tick_cv;
  bool stopping = false;
};

namespace {

std::string report_ref(const std::string& session_id) {
  return "/sessions/" + session_id + "/report";
}

std::string random_session_id() {
  static std::mutex m;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[32];
  std::snprintf(buf, sizeof buf, "s-%012llx",
                static_cast<unsigned long long>(gen() & 0xffffffffffffULL));
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
}

// Helpers below run with the host mutex held, which keeps each subgroup's
// fan-out in event order.

std::string author_name(const Session& s, const ChatMessage& m) {
  if (m.is_human()) {
    const Participant* p = s.participant(std::get<ParticipantId>(m.author));
    return p != nullptr ? p->display_name : std::get<ParticipantId>(m.author).value;
  }
  return "Surrogate";
}

std::string chat_record(const Session& s, const ChatMessage& m) {
  return wire::encode(wire::ChatOut{m.id, m.is_human() ? "participant" : "surrogate",
                                    author_name(s, m), m.text,
                                    m.is_relay() ? "relayed" : "original", m.timestamp});
}

std::string welcome_record(const Session& s, const ParticipantId& id) {
  wire::Welcome w{id, std::nullopt, {}};
  const Participant* p = s.participant(id);
  if (p != nullptr && p->subgroup) {
    w.subgroup_id = p->subgroup;
    if (const Subgroup* g = s.subgroup(*p->subgroup))
      for (const auto& m : g->members) w.roster.push_back({m, s.participant(m)->display_name});
  }
  return wire::encode(w);
}

std::string system_record(const Session& s, Millis now) {
  const auto remaining = s.remaining(now);
  return wire::encode(wire::System{std::string(to_string(s.phase())),
                                   static_cast<long long>(std::ceil(remaining.count() / 1000.0)),
                                   s.config().task_prompt});
}

void send_to(SessionHost& host, const ParticipantId& id, std::string record) {
  auto it = host.connections.find(id);
  if (it != host.connections.end()) it->second->send(std::move(record));
}

void broadcast(SessionHost& host, const Broadcast& b, const std::optional<ParticipantId>& author) {
  const std::string record = chat_record(host.session, b.message);
  if (author) send_to(host, *author, record);
  for (const auto& r : b.recipients) send_to(host, r, record);
}

std::string error_record(std::string reason) { return wire::encode(wire::Error{std::move(reason)}); }

std::string describe(const SessionError& e) {
  return std::string(to_string(e.code())) + ": " + e.what();
}

}  // namespace

Server::Server(ServerOptions options) : options_(std::move(options)) {
  if (!options_.clock) {
    options_.clock = [] {
      return std::chrono::duration_cast<Millis>(
          std::chrono::steady_clock::now().time_since_epoch());
    };
  }
}

Server::~Server() { stop(); }

Millis Server::clock_now() const { return options_.clock(); }

std::filesystem::path Server::log_path(const std::string& session_id) const {
  return options_.data_dir / (session_id + ".log");
}

std::shared_ptr<SessionHost> Server::host(const std::string& session_id) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw std::out_of_range("unknown session " + session_id);
  return it->second;
}

// Control operations.

std::string Server::create_session(const nlohmann::json& config_patch) {
  SessionConfig config = options_.defaults;
  try {
    from_json(config_patch.is_null() ? nlohmann::json::object() : config_patch, config);
  } catch (const std::exception& e) {
    throw SessionError(SessionError::Code::invalid_config,
                       std::string("invalid session config: ") + e.what());
  }
  std::string id;
  {
    std::lock_guard lock(sessions_mutex_);
    do {
      id = random_session_id();
    } while (sessions_.contains(id) || std::filesystem::exists(log_path(id)));
  }
  config.session_id = SessionId(id);
  auto host = std::make_shared<SessionHost>(config);  // validates
  host->origin = clock_now();
  std::filesystem::create_directories(options_.data_dir);
  host->log = std::make_unique<LogWriter>(log_path(id));
  host->survey_path = options_.data_dir / (id + ".surveys.csv");
  host->session.set_listener([h = host.get()](const SessionEvent& e) { h->log->append(e); });
  if (config.distiller_backend == DistillerBackend::external_llm) {
    host->llm = std::make_shared<LlmDistiller>(config.llm, [id](std::string_view reason) {
      std::cerr << "session " << id << ": distiller degraded: " << reason << "\n";
    });
  }
  {
    std::lock_guard lock(sessions_mutex_);
    sessions_.emplace(id, host);
  }
  if (options_.auto_tick && running_) host->ticker = std::thread([this, host] { tick_loop(host); });
  return id;
}

void Server::start_session(const std::string& session_id) {
  auto h = host(session_id);
  std::lock_guard lock(h->mutex);
  const Millis now = clock_now() - h->origin;
  h->session.start(now);
  for (const auto& [id, _] : h->connections) {
    send_to(*h, id, welcome_record(h->session, id));
    send_to(*h, id, system_record(h->session, now));
  }
}

std::string Server::end_session(const std::string& session_id) {
  auto h = host(session_id);
  std::lock_guard lock(h->mutex);
  if (h->session.end(clock_now() - h->origin, "manual")) finalize(*h);
  return report_ref(session_id);
}

void Server::tick(const std::string& session_id) {
  auto h = host(session_id);
  run_tick(*h);
}

void Server::run_tick(SessionHost& h) {
  DraftMap drafts;
  bool use_drafts = false;
  if (h.llm) {
    // Remote distillation runs without the session lock; the session re-checks
    // every draft against its state when the tick is applied.
    std::vector<SurrogateState> due;
    DistillerPolicy policy;
    {
      std::lock_guard lock(h.mutex);
      if (h.session.phase() != Phase::running) return;
      policy = DistillerPolicy::from(h.session.config());
      for (const auto& id : h.session.distillations_due(clock_now() - h.origin))
        due.push_back(h.session.surrogate_state(id));
    }
    std::vector<std::future<std::optional<InsightDraft>>> pending;
    for (const auto& state : due)
      pending.push_back(std::async(std::launch::async, [&, state] {
        return h.llm->distill(state, policy, {});
      }));
    for (std::size_t i = 0; i < due.size(); ++i) drafts[due[i].subgroup_id] = pending[i].get();
    use_drafts = true;
  }

  std::lock_guard lock(h.mutex);
  if (h.session.phase() != Phase::running) return;
  const Millis now = clock_now() - h.origin;
  const TickOutcome out = use_drafts ? h.session.scheduler_tick(now, drafts)
                                     : h.session.scheduler_tick(now);
  for (const auto& relay : out.relays) broadcast(h, relay, std::nullopt);
  if (out.ended) {
    finalize(h);
  } else {
    const std::string sys = system_record(h.session, now);
    for (const auto& [id, conn] : h.connections) conn->send(sys);
  }
}

void Server::finalize(SessionHost& h) {
  const auto report = forensic_report(h.session.events());
  h.report_json = report_json(report);
  h.report_text = render_report_text(report);
  const std::string id = h.session.config().session_id.value;
  write_file(options_.data_dir / (id + ".report.json"), *h.report_json);
  write_file(options_.data_dir / (id + ".report.txt"), *h.report_text);
  const Millis now = clock_now() - h.origin;
  const std::string sys = system_record(h.session, now);
  const std::string ended = wire::encode(wire::Ended{report_ref(id)});
  for (const auto& [_, conn] : h.connections) {
    conn->send(sys);
    conn->send(ended);
  }
  h.tick_cv.notify_all();
}

void Server::tick_loop(std::shared_ptr<SessionHost> h) {
  for (;;) {
    Millis interval;
    {
      std::unique_lock lock(h->mutex);
      interval = h->session.config().tick_interval;
      h->tick_cv.wait_for(lock, interval, [&] { return h->stopping; });
      if (h->stopping || h->session.phase() == Phase::ended) return;
      if (h->session.phase() == Phase::lobby) continue;
    }
    try {
      run_tick(*h);
    } catch (const std::exception& e) {
      std::cerr << "tick failed: " << e.what() << "\n";
    }
  }
}

nlohmann::json Server::status(const std::string& session_id) {
  auto h = host(session_id);
  std::lock_guard lock(h->mutex);
  const Session& s = h->session;
  const Millis now = clock_now() - h->origin;
  nlohmann::json subgroups = nlohmann::json::array();
  for (const auto& g : s.subgroups()) subgroups.push_back(g);
  return {{"session_id", session_id},
          {"phase", to_string(s.phase())},
          {"mode", to_string(s.config().mode)},
          {"participants", s.participants().size()},
          {"queued", s.join_queue()},
          {"subgroups", subgroups},
          {"events", s.events().size()},
          {"remaining_seconds", std::ceil(s.remaining(now).count() / 1000.0)},
          {"surveys", s.surveys().size()}};
}

std::vector<SessionEvent> Server::event_log(const std::string& session_id) {
  auto h = host(session_id);
  std::lock_guard lock(h->mutex);
  return h->session.events();
}

std::optional<std::string> Server::report(const std::string& session_id, bool text) {
  auto h = host(session_id);
  std::lock_guard lock(h->mutex);
  return text ? h->report_text : h->report_json;
}

// Chat connections.

void Server::handle_record(Connection& conn, const std::string& line) {
  wire::ClientRecord record;
  try {
    record = wire::parse_client_record(line);
  } catch (const wire::WireError& e) {
    conn.send(error_record(std::string("bad_record: ") + e.what()));
    return;
  }

  if (const auto* join = std::get_if<wire::Join>(&record)) {
    if (conn.host) {
      conn.send(error_record("already_joined: this connection has already joined"));
      return;
    }
    std::shared_ptr<SessionHost> h;
    try {
      h = host(join->session_id);
    } catch (const std::out_of_range&) {
      conn.send(error_record("unknown_session: " + join->session_id));
      return;
    }
    std::lock_guard lock(h->mutex);
    Session& s = h->session;
    const Millis now = clock_now() - h->origin;
    std::shared_ptr<Connection> self;
    {
      std::lock_guard cl(connections_mutex_);
      for (const auto& c : connections_)
        if (c.get() == &conn) self = c;
    }
    if (!join->participant_id.empty()) {
      const ParticipantId pid(join->participant_id);
      if (s.participant(pid) == nullptr) {
        conn.send(error_record("unknown_participant: " + join->participant_id));
        return;
      }
      if (auto old = h->connections.find(pid); old != h->connections.end()) old->second->close();
      conn.host = h;
      conn.participant = pid;
      h->connections[pid] = self;
      conn.send(welcome_record(s, pid));
      conn.send(system_record(s, now));
      // Replay the subgroup's history after the client's last seen message.
      const Participant* p = s.participant(pid);
      bool emitting = join->resume_after.empty();
      for (const auto& e : s.events()) {
        const auto* posted = std::get_if<MessagePosted>(&e.payload);
        if (posted == nullptr || !p->subgroup || posted->message.subgroup != *p->subgroup)
          continue;
        if (emitting) conn.send(chat_record(s, posted->message));
        if (posted->message.id.value == join->resume_after) emitting = true;
      }
      if (s.phase() == Phase::ended)
        conn.send(wire::encode(wire::Ended{report_ref(join->session_id)}));
      return;
    }
    JoinResult result;
    try {
      result = s.join(join->display_name, now);
    } catch (const SessionError& e) {
      conn.send(error_record(describe(e)));
      return;
    }
    conn.host = h;
    conn.participant = result.participant.id;
    h->connections[result.participant.id] = self;
    conn.send(welcome_record(s, result.participant.id));
    conn.send(system_record(s, now));
    for (const auto& placed : result.placed)
      if (placed.id != result.participant.id) send_to(*h, placed.id, welcome_record(s, placed.id));
    return;
  }

  if (!conn.host) {
    conn.send(error_record("not_joined: send a join record first"));
    return;
  }
  SessionHost& h = *conn.host;
  std::lock_guard lock(h.mutex);
  const Millis now = clock_now() - h.origin;
  try {
    if (const auto* chat = std::get_if<wire::Chat>(&record)) {
      const Broadcast b = h.session.post_message(conn.participant, chat->text, now);
      broadcast(h, b, conn.participant);
    } else if (const auto* answers = std::get_if<wire::Survey>(&record)) {
      h.session.submit_survey(conn.participant, answers->answers);
      write_file(h.survey_path, survey::format_survey_csv(h.session.surveys()));
      conn.send(system_record(h.session, now));
    }
  } catch (const SessionError& e) {
    conn.send(error_record(describe(e)));
  }
}

void Server::serve_connection(std::shared_ptr<Connection> conn) {
  conn->writer = std::thread([conn] { conn->drain(); });
  while (auto line = conn->stream->read_record()) {
    try {
      handle_record(*conn, *line);
    } catch (const std::exception& e) {
      conn->send(error_record(std::string("internal: ") + e.what()));
    }
  }
  if (conn->host) {
    std::lock_guard lock(conn->host->mutex);
    auto it = conn->host->connections.find(conn->participant);
    if (it != conn->host->connections.end() && it->second == conn)
      conn->host->connections.erase(it);
  }
  conn->close();
  conn->finished = true;
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    std::lock_guard lock(connections_mutex_);
    // Reap finished connections.
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->finished) {
        if ((*it)->reader.joinable()) (*it)->reader.join();
        if ((*it)->writer.joinable()) (*it)->writer.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
    connections_.push_back(conn);
    conn->reader = std::thread([this, conn, fd] {
      conn->stream = accept_record_stream(fd);
      if (!conn->stream) {
        conn->finished = true;
        return;
      }
      serve_connection(conn);
    });
  }
}

// HTTP control API.

void Server::install_routes() {
  using httplib::Request;
  using httplib::Response;
  auto json_reply = [](Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  };
  auto guarded = [json_reply](auto fn) {
    return [fn, json_reply](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const SessionError& e) {
        const int status = e.code() == SessionError::Code::invalid_config ? 400 : 409;
        json_reply(res, status, {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const std::out_of_range& e) {
        json_reply(res, 404, {{"error", "unknown_session"}, {"message", e.what()}});
      } catch (const nlohmann::json::exception& e) {
        json_reply(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        json_reply(res, 500, {{"error", "internal"}, {"message", e.what()}});
      }
    };
  };

  http_->Post("/sessions", guarded([this, json_reply](const Request& req, Response& res) {
                const auto body = req.body.empty() ? nlohmann::json::object()
                                                   : nlohmann::json::parse(req.body);
                json_reply(res, 201, {{"session_id", create_session(body)}});
              }));
  http_->Post(R"(/sessions/([^/]+)/start)",
              guarded([this, json_reply](const Request& req, Response& res) {
                start_session(req.matches[1]);
                json_reply(res, 200, status(req.matches[1]));
              }));
  http_->Post(R"(/sessions/([^/]+)/end)",
              guarded([this, json_reply](const Request& req, Response& res) {
                json_reply(res, 200, {{"report_ref", end_session(req.matches[1])}});
              }));
  http_->Get(R"(/sessions/([^/]+))", guarded([this, json_reply](const Request& req, Response& res) {
               json_reply(res, 200, status(req.matches[1]));
             }));
  http_->Get(R"(/sessions/([^/]+)/report)",
             guarded([this, json_reply](const Request& req, Response& res) {
               const bool text = req.get_param_value("format") == "text";
               auto doc = report(req.matches[1], text);
               if (!doc) {
                 json_reply(res, 409, {{"error", "not_ended"},
                                       {"message", "the report is produced when the session ends"}});
                 return;
               }
               res.set_content(*doc, text ? "text/plain; charset=utf-8" : "application/json");
             }));
  http_->Get(R"(/sessions/([^/]+)/log)",
             guarded([this](const Request& req, Response& res) {
               res.set_content(format_log(event_log(req.matches[1])), "application/x-ndjson");
             }));
  http_->Get(R"(/sessions/([^/]+)/taxonomy)",
             guarded([this](const Request& req, Response& res) {
               const auto events = event_log(req.matches[1]);
               res.set_content(report_json(forensic_report(events)), "application/json");
             }));
  http_->Get(R"(/sessions/([^/]+)/surveys)",
             guarded([this](const Request& req, Response& res) {
               auto h = host(req.matches[1]);
               std::lock_guard lock(h->mutex);
               res.set_content(survey::format_survey_csv(h->session.surveys()), "text/csv");
             }));
  http_->Get(R"(/sessions/([^/]+)/survey-results)",
             guarded([this, json_reply](const Request& req, Response& res) {
               auto h = host(req.matches[1]);
               std::lock_guard lock(h->mutex);
               if (h->session.surveys().empty()) {
                 json_reply(res, 409, {{"error", "no_surveys"}, {"message", "no responses yet"}});
                 return;
               }
               survey::AnalysisOptions options;
               const auto results = survey::analyze_surveys(h->session.surveys(), options);
               res.set_content(survey::results_json(results, options), "application/json");
             }));
}

void Server::start() {
  if (running_) return;
  std::filesystem::create_directories(options_.data_dir);

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(options_.chat_port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("bad listen address " + options_.host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 128) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on chat port " + std::to_string(options_.chat_port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  chat_port_ = ntohs(addr.sin_port);

  http_ = std::make_unique<httplib::Server>();
  install_routes();
  if (options_.http_port == 0) {
    http_port_ = http_->bind_to_any_port(options_.host);
  } else {
    http_port_ = http_->bind_to_port(options_.host, options_.http_port) ? options_.http_port : -1;
  }
  if (http_port_ < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on http port " + std::to_string(options_.http_port));
  }

  running_ = true;
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
  std::lock_guard lock(sessions_mutex_);
  if (options_.auto_tick)
    for (auto& [_, h] : sessions_)
      if (!h->ticker.joinable()) h->ticker = std::thread([this, h = h] { tick_loop(h); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accept_thread_.joinable()) accept_thread_.join();

  std::vector<std::shared_ptr<SessionHost>> hosts;
  {
    std::lock_guard lock(sessions_mutex_);
    for (auto& [_, h] : sessions_) hosts.push_back(h);
  }
  for (auto& h : hosts) {
    {
      std::lock_guard lock(h->mutex);
      h->stopping = true;
    }
    h->tick_cv.notify_all();
    if (h->ticker.joinable()) h->ticker.join();
  }

  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(connections_mutex_);
    conns.swap(connections_);
  }
  // Wakes readers, including any still inside the handshake.
  for (auto& c : conns)
    if (!c->finished) ::shutdown(c->fd, SHUT_RDWR);
  for (auto& c : conns) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
  // Break host <-> connection reference cycles.
  for (auto& h : hosts) {
    std::lock_guard lock(h->mutex);
    h->connections.clear();
  }
  for (auto& c : conns) c->host.reset();
  wait_cv_.notify_all();
}

void Server::wait() {
  std::unique_lock lock(wait_mutex_);
  wait_cv_.wait(lock, [&] { return !running_; });
}

}  // namespace csi
