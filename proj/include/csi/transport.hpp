#pragma once

// Record transport for chat clients. One listening port serves two framings:
// plain TCP with one record per line, and WebSocket (RFC 6455) with one
// record per text message, picked by sniffing for an HTTP upgrade request.

#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace csi {

class RecordStream {
 public:
  virtual ~RecordStream() = default;
  /// Next record, or none when the peer has gone.
  virtual std::optional<std::string> read_record() = 0;
  /// False when the peer has gone. Safe to call concurrently with read_record.
  virtual bool write_record(const std::string& record) = 0;
  /// Wakes a blocked reader; idempotent.
  virtual void shutdown() = 0;
};

/// Takes ownership of a connected socket and performs the WebSocket handshake
/// if the client asks for one. Returns nullptr for a malformed handshake.
std::unique_ptr<RecordStream> accept_record_stream(int fd, std::size_t max_record = 64 * 1024);

/// Client side of the plain-TCP framing, for tools and tests.
std::unique_ptr<RecordStream> connect_record_stream(const std::string& host, int port);

/// Client side of the WebSocket framing (masked frames), for tests.
std::unique_ptr<RecordStream> connect_websocket_stream(const std::string& host, int port,
                                                       const std::string& path = "/");

/// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept_key(const std::string& client_key);

}  // namespace csi
