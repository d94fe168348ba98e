#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csi/model.hpp"

namespace httplib {
class Server;
}

namespace csi {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int http_port = 0;  // 0 picks an ephemeral port
  int chat_port = 0;
  std::filesystem::path data_dir = "csi-data";
  /// Base config; each create request is merged over it.
  SessionConfig defaults;
  /// Runs each session's scheduler on a timer. Tests that drive ticks by hand
  /// turn this off and call Server::tick.
  bool auto_tick = true;
  /// Milliseconds on the server clock; defaults to a steady clock.
  std::function<Millis()> clock;
};

struct SessionHost;
struct Connection;

/// Chat service: a line/WebSocket record port for participants and an HTTP
/// control API for facilitators.
///
///   POST /sessions                 config document in, {"session_id"} out
///   POST /sessions/{id}/start
///   POST /sessions/{id}/end        idempotent, returns the report reference
///   GET  /sessions/{id}            status
///   GET  /sessions/{id}/report     forensic report (?format=text), after end
///   GET  /sessions/{id}/log        event log, one JSON record per line
///   GET  /sessions/{id}/taxonomy   ranked ideas over the log so far
///   GET  /sessions/{id}/surveys    survey responses as CSV
///   GET  /sessions/{id}/survey-results  analysis document
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds both ports and starts serving. Throws std::runtime_error on bind failure.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  int http_port() const { return http_port_; }
  int chat_port() const { return chat_port_; }

  // Control operations behind the HTTP routes. Throw SessionError for
  // rejected requests and std::out_of_range for unknown sessions.
  std::string create_session(const nlohmann::json& config_patch);
  void start_session(const std::string& session_id);
  std::string end_session(const std::string& session_id);
  void tick(const std::string& session_id);
  nlohmann::json status(const std::string& session_id);
  std::vector<SessionEvent> event_log(const std::string& session_id);
  std::optional<std::string> report(const std::string& session_id, bool text);

  std::filesystem::path log_path(const std::string& session_id) const;

 private:
  std::shared_ptr<SessionHost> host(const std::string& session_id);
  Millis clock_now() const;
  void tick_loop(std::shared_ptr<SessionHost> host);
  void run_tick(SessionHost& host);
  void finalize(SessionHost& host);
  void accept_loop();
  void serve_connection(std::shared_ptr<Connection> conn);
  void handle_record(Connection& conn, const std::string& line);
  void install_routes();

  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  int http_port_ = 0;
  int chat_port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread http_thread_;
  std::thread accept_thread_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionHost>> sessions_;

  std::mutex connections_mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;

  std::mutex wait_mutex_;
  std::condition_variable wait_cv_;
};

}  // namespace csi
