#include "csi/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cstring>
#include <random>
#include <stdexcept>

namespace csi {

namespace {

bool send_all(int fd, const char* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

/// Buffered reader over a socket shared by both framings.
class SocketReader {
 public:
  explicit SocketReader(int fd, std::string initial = {}) : fd_(fd), buf_(std::move(initial)) {}

  bool fill() {
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buf_.append(chunk, static_cast<std::size_t>(n));
      return true;
    }
  }

  /// Reads until `delim`; the result excludes it. none on EOF or overflow.
  std::optional<std::string> read_until(std::string_view delim, std::size_t limit) {
    std::size_t scanned = 0;
    for (;;) {
      const auto pos = buf_.find(delim, scanned);
      if (pos != std::string::npos) {
        std::string out = buf_.substr(0, pos);
        buf_.erase(0, pos + delim.size());
        return out;
      }
      if (buf_.size() > limit) return std::nullopt;
      scanned = buf_.size() >= delim.size() ? buf_.size() - delim.size() + 1 : 0;
      if (!fill()) return std::nullopt;
    }
  }

  bool read_exact(std::size_t n, std::string& out) {
    while (buf_.size() < n)
      if (!fill()) return false;
    out.assign(buf_, 0, n);
    buf_.erase(0, n);
    return true;
  }

  std::string& buffer() { return buf_; }

 private:
  int fd_;
  std::string buf_;
};

class SocketStream : public RecordStream {
 public:
  explicit SocketStream(int fd) : fd_(fd) {}
  ~SocketStream() override { ::close(fd_); }

  void shutdown() override {
    if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 protected:
  bool send_bytes(const std::string& bytes) {
    std::lock_guard lock(write_mutex_);
    return send_all(fd_, bytes.data(), bytes.size());
  }

  int fd_;
  std::atomic<bool> shut_{false};
  std::mutex write_mutex_;
};

class LineStream final : public SocketStream {
 public:
  LineStream(int fd, std::string initial, std::size_t max_record)
      : SocketStream(fd), reader_(fd, std::move(initial)), max_record_(max_record) {}

  std::optional<std::string> read_record() override {
    for (;;) {
      auto line = reader_.read_until("\n", max_record_);
      if (!line) return std::nullopt;
      if (!line->empty() && line->back() == '\r') line->pop_back();
      if (!line->empty()) return line;
    }
  }

  bool write_record(const std::string& record) override { return send_bytes(record + "\n"); }

 private:
  SocketReader reader_;
  std::size_t max_record_;
};

class WebSocketStream final : public SocketStream {
 public:
  WebSocketStream(int fd, std::string initial, std::size_t max_record, bool client)
      : SocketStream(fd), reader_(fd, std::move(initial)), max_record_(max_record),
        client_(client) {}

  std::optional<std::string> read_record() override {
    std::string message;
    for (;;) {
      std::string header;
      if (!reader_.read_exact(2, header)) return std::nullopt;
      const auto b0 = static_cast<unsigned char>(header[0]);
      const auto b1 = static_cast<unsigned char>(header[1]);
      const bool fin = (b0 & 0x80) != 0;
      const int opcode = b0 & 0x0f;
      const bool masked = (b1 & 0x80) != 0;
      std::uint64_t length = b1 & 0x7f;
      std::string ext;
      if (length == 126) {
        if (!reader_.read_exact(2, ext)) return std::nullopt;
        length = (static_cast<std::uint64_t>(static_cast<unsigned char>(ext[0])) << 8) |
                 static_cast<unsigned char>(ext[1]);
      } else if (length == 127) {
        if (!reader_.read_exact(8, ext)) return std::nullopt;
        length = 0;
        for (char c : ext) length = (length << 8) | static_cast<unsigned char>(c);
      }
      if (length > max_record_ || message.size() + length > max_record_) return std::nullopt;
      std::string mask;
      if (masked && !reader_.read_exact(4, mask)) return std::nullopt;
      std::string payload;
      if (!reader_.read_exact(static_cast<std::size_t>(length), payload)) return std::nullopt;
      if (masked)
        for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= mask[i % 4];

      switch (opcode) {
        case 0x0:  // continuation
        case 0x1:  // text
        case 0x2:  // binary
          message += payload;
          if (fin) {
            if (!message.empty()) return message;
            message.clear();
          }
          break;
        case 0x8:  // close
          send_frame(0x8, payload.substr(0, 2));
          return std::nullopt;
        case 0x9:  // ping
          send_frame(0xA, payload);
          break;
        default:  // pong and reserved opcodes
          break;
      }
    }
  }

  bool write_record(const std::string& record) override { return send_frame(0x1, record); }

 private:
  bool send_frame(int opcode, const std::string& payload) {
    std::string frame;
    frame += static_cast<char>(0x80 | opcode);
    const char mask_bit = client_ ? static_cast<char>(0x80) : 0;
    const std::size_t n = payload.size();
    if (n < 126) {
      frame += static_cast<char>(mask_bit | static_cast<char>(n));
    } else if (n <= 0xffff) {
      frame += static_cast<char>(mask_bit | 126);
      frame += static_cast<char>((n >> 8) & 0xff);
      frame += static_cast<char>(n & 0xff);
    } else {
      frame += static_cast<char>(mask_bit | 127);
      for (int shift = 56; shift >= 0; shift -= 8)
        frame += static_cast<char>((static_cast<std::uint64_t>(n) >> shift) & 0xff);
    }
    if (client_) {
      std::array<char, 4> mask{};
      std::random_device rd;
      for (auto& m : mask) m = static_cast<char>(rd() & 0xff);
      frame.append(mask.data(), mask.size());
      for (std::size_t i = 0; i < n; ++i) frame += static_cast<char>(payload[i] ^ mask[i % 4]);
    } else {
      frame += payload;
    }
    return send_bytes(frame);
  }

  SocketReader reader_;
  std::size_t max_record_;
  bool client_;
};

int connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
    throw std::runtime_error("cannot resolve " + host);
  int fd = -1;
  for (auto* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

std::string base64(const unsigned char* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                                      static_cast<int>(n));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

}  // namespace

std::string websocket_accept_key(const std::string& client_key) {
  const std::string input = client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest);
  return base64(digest, sizeof digest);
}

std::unique_ptr<RecordStream> accept_record_stream(int fd, std::size_t max_record) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  SocketReader sniff(fd);
  while (sniff.buffer().size() < 4)
    if (!sniff.fill()) {
      // A short record followed by EOF is still a valid line stream.
      return std::make_unique<LineStream>(fd, std::move(sniff.buffer()), max_record);
    }
  if (sniff.buffer().compare(0, 4, "GET ") != 0)
    return std::make_unique<LineStream>(fd, std::move(sniff.buffer()), max_record);

  auto head = sniff.read_until("\r\n\r\n", 16 * 1024);
  if (!head) {
    ::close(fd);
    return nullptr;
  }
  std::string key;
  bool upgrade = false;
  std::size_t start = head->find("\r\n");
  while (start != std::string::npos) {
    const std::size_t end = head->find("\r\n", start + 2);
    const std::string line = head->substr(start + 2, end == std::string::npos
                                                         ? std::string::npos
                                                         : end - start - 2);
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
      const std::string name = lower(trim(line.substr(0, colon)));
      const std::string value = trim(line.substr(colon + 1));
      if (name == "sec-websocket-key") key = value;
      if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
    }
    start = end;
  }
  if (!upgrade || key.empty()) {
    const std::string reply =
        "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
    send_all(fd, reply.data(), reply.size());
    ::close(fd);
    return nullptr;
  }
  const std::string reply =
      "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Accept: " +
      websocket_accept_key(key) + "\r\n\r\n";
  if (!send_all(fd, reply.data(), reply.size())) {
    ::close(fd);
    return nullptr;
  }
  return std::make_unique<WebSocketStream>(fd, std::move(sniff.buffer()), max_record, false);
}

std::unique_ptr<RecordStream> connect_record_stream(const std::string& host, int port) {
  return std::make_unique<LineStream>(connect_tcp(host, port), std::string{}, 1 << 20);
}

std::unique_ptr<RecordStream> connect_websocket_stream(const std::string& host, int port,
                                                       const std::string& path) {
  const int fd = connect_tcp(host, port);
  unsigned char nonce[16];
  std::random_device rd;
  for (auto& b : nonce) b = static_cast<unsigned char>(rd() & 0xff);
  const std::string key = base64(nonce, sizeof nonce);
  const std::string request = "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" +
                              std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                              "Sec-WebSocket-Version: 13\r\nSec-WebSocket-Key: " +
                              key + "\r\n\r\n";
  if (!send_all(fd, request.data(), request.size())) {
    ::close(fd);
    throw std::runtime_error("websocket handshake failed");
  }
  SocketReader reader(fd);
  auto head = reader.read_until("\r\n\r\n", 16 * 1024);
  if (!head || head->rfind("HTTP/1.1 101", 0) != 0 ||
      head->find(websocket_accept_key(key)) == std::string::npos) {
    ::close(fd);
    throw std::runtime_error("websocket handshake rejected");
  }
  return std::make_unique<WebSocketStream>(fd, std::move(reader.buffer()), 1 << 20, true);
}

}  // namespace csi
