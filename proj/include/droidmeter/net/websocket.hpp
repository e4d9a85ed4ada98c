#pragma once

// RFC 6455 WebSocket over TcpSocket: client and server handshakes, frame
// codec with masking, ping/pong, and fragmented-message reassembly. Includes
// the SHA-1 and base64 needed by the handshake and a small HTTP/1.1 reader
// for the upgrade request and the /json discovery endpoint.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "droidmeter/errors.hpp"
#include "droidmeter/net/socket.hpp"

namespace droidmeter::net {

// --- SHA-1 (RFC 3174) ---------------------------------------------------------

inline std::array<std::uint8_t, 20> sha1(std::string_view data) {
  std::uint32_t h[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};

  std::string msg(data);
  const std::uint64_t bit_len = static_cast<std::uint64_t>(msg.size()) * 8;
  msg += static_cast<char>(0x80);
  while (msg.size() % 64 != 56) msg += '\0';
  for (int i = 7; i >= 0; --i) msg += static_cast<char>((bit_len >> (i * 8)) & 0xFF);

  auto rol = [](std::uint32_t v, int bits) { return (v << bits) | (v >> (32 - bits)); };

  for (size_t chunk = 0; chunk < msg.size(); chunk += 64) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[chunk + i * 4])) << 24) |
             (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[chunk + i * 4 + 1])) << 16) |
             (static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[chunk + i * 4 + 2])) << 8) |
             static_cast<std::uint32_t>(static_cast<std::uint8_t>(msg[chunk + i * 4 + 3]));
    }
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5A827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDC;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6;
      }
      std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  std::array<std::uint8_t, 20> digest{};
  for (int i = 0; i < 5; ++i) {
    digest[static_cast<size_t>(i * 4)] = static_cast<std::uint8_t>(h[i] >> 24);
    digest[static_cast<size_t>(i * 4 + 1)] = static_cast<std::uint8_t>(h[i] >> 16);
    digest[static_cast<size_t>(i * 4 + 2)] = static_cast<std::uint8_t>(h[i] >> 8);
    digest[static_cast<size_t>(i * 4 + 3)] = static_cast<std::uint8_t>(h[i]);
  }
  return digest;
}

inline std::string base64_encode(std::string_view data) {
  static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < data.size()) {
    std::uint32_t v = (static_cast<std::uint8_t>(data[i]) << 16) |
                      (static_cast<std::uint8_t>(data[i + 1]) << 8) |
                      static_cast<std::uint8_t>(data[i + 2]);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += tbl[v & 63];
    i += 3;
  }
  if (i + 1 == data.size()) {
    std::uint32_t v = static_cast<std::uint8_t>(data[i]) << 16;
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    std::uint32_t v = (static_cast<std::uint8_t>(data[i]) << 16) |
                      (static_cast<std::uint8_t>(data[i + 1]) << 8);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string websocket_accept_key(const std::string& client_key) {
  auto digest = sha1(client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11");
  return base64_encode(std::string_view(reinterpret_cast<const char*>(digest.data()), digest.size()));
}

// --- minimal HTTP/1.1 ---------------------------------------------------------

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lowercase names
};

namespace detail {

inline std::string to_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Reads from the socket until the blank line that ends an HTTP header block.
inline std::string read_http_head(const TcpSocket& sock, std::string& carry, int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    if (auto pos = carry.find("\r\n\r\n"); pos != std::string::npos) {
      std::string head = carry.substr(0, pos + 4);
      carry.erase(0, pos + 4);
      return head;
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) throw NetError("timeout reading HTTP header block");
    const int remaining = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
    auto chunk = sock.recv_some(4096, remaining);
    if (!chunk) continue;
    if (chunk->empty()) throw NetError("connection closed during HTTP header block");
    carry += *chunk;
  }
}

inline std::map<std::string, std::string> parse_header_lines(std::string_view head) {
  std::map<std::string, std::string> headers;
  size_t pos = head.find("\r\n");
  while (pos != std::string_view::npos) {
    size_t next = head.find("\r\n", pos + 2);
    if (next == std::string_view::npos) break;
    std::string_view line = head.substr(pos + 2, next - pos - 2);
    if (line.empty()) break;
    auto colon = line.find(':');
    if (colon != std::string_view::npos)
      headers[to_lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
    pos = next;
  }
  return headers;
}

}  // namespace detail

inline HttpRequest read_http_request(const TcpSocket& sock, std::string& carry,
                                     int timeout_ms = 5000) {
  std::string head = detail::read_http_head(sock, carry, timeout_ms);
  HttpRequest req;
  auto line_end = head.find("\r\n");
  std::string request_line = head.substr(0, line_end);
  auto sp1 = request_line.find(' ');
  auto sp2 = request_line.rfind(' ');
  if (sp1 == std::string::npos || sp2 == std::string::npos || sp2 <= sp1)
    throw NetError("bad HTTP request line: " + request_line);
  req.method = request_line.substr(0, sp1);
  req.path = request_line.substr(sp1 + 1, sp2 - sp1 - 1);
  req.headers = detail::parse_header_lines(head);
  return req;
}

inline void send_http_response(const TcpSocket& sock, int status, const std::string& reason,
                               const std::string& content_type, const std::string& body) {
  std::string resp = "HTTP/1.1 " + std::to_string(status) + " " + reason + "\r\n";
  resp += "Content-Type: " + content_type + "\r\n";
  resp += "Content-Length: " + std::to_string(body.size()) + "\r\n";
  resp += "Connection: close\r\n\r\n";
  resp += body;
  sock.send_all(resp);
}

// One-shot GET returning (status, body). Connection: close keeps it simple.
inline std::pair<int, std::string> http_get(const std::string& host, std::uint16_t port,
                                            const std::string& path, int timeout_ms = 5000) {
  TcpSocket sock = TcpSocket::connect(host, port, timeout_ms);
  sock.send_all("GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                "\r\nConnection: close\r\n\r\n");
  std::string carry;
  std::string head = detail::read_http_head(sock, carry, timeout_ms);
  int status = 0;
  if (head.size() > 12) status = std::atoi(head.c_str() + 9);
  auto headers = detail::parse_header_lines(head);
  size_t expect = 0;
  bool has_length = false;
  if (auto it = headers.find("content-length"); it != headers.end()) {
    expect = static_cast<size_t>(std::stoul(it->second));
    has_length = true;
  }
  std::string body = std::move(carry);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (!has_length || body.size() < expect) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) break;
    const int remaining = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
    auto chunk = sock.recv_some(8192, remaining);
    if (!chunk) continue;
    if (chunk->empty()) break;  // orderly close ends the body
    body += *chunk;
  }
  if (has_length && body.size() > expect) body.resize(expect);
  return {status, std::move(body)};
}

// --- WebSocket ------------------------------------------------------------------

struct WsMessage {
  enum class Type { Text, Binary, Close };
  Type type = Type::Text;
  std::string payload;
};

class WebSocket {
 public:
  WebSocket() = default;

  // Client-side connect + upgrade handshake.
  static WebSocket connect(const std::string& host, std::uint16_t port, const std::string& path,
                           int timeout_ms = 5000) {
    TcpSocket sock = TcpSocket::connect(host, port, timeout_ms);

    std::string key_bytes(16, '\0');
    static thread_local std::mt19937 rng{std::random_device{}()};
    for (char& c : key_bytes) c = static_cast<char>(rng() & 0xFF);
    const std::string key = base64_encode(key_bytes);

    sock.send_all("GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                  "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                  "\r\nSec-WebSocket-Version: 13\r\n\r\n");

    std::string carry;
    std::string head = detail::read_http_head(sock, carry, timeout_ms);
    if (head.find(" 101 ") == std::string::npos)
      throw ProtocolError("websocket upgrade refused: " + head.substr(0, head.find("\r\n")));
    auto headers = detail::parse_header_lines(head);
    auto it = headers.find("sec-websocket-accept");
    if (it == headers.end() || it->second != websocket_accept_key(key))
      throw ProtocolError("websocket handshake: bad Sec-WebSocket-Accept");

    WebSocket ws;
    ws.sock_ = std::move(sock);
    ws.buffer_ = std::move(carry);
    ws.mask_outgoing_ = true;
    return ws;
  }

  // Server-side upgrade of an accepted connection whose request was already read.
  static WebSocket accept(TcpSocket sock, const HttpRequest& req, std::string carry = {}) {
    auto it = req.headers.find("sec-websocket-key");
    if (it == req.headers.end()) throw ProtocolError("upgrade request lacks Sec-WebSocket-Key");
    sock.send_all("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade"
                  "\r\nSec-WebSocket-Accept: " + websocket_accept_key(it->second) + "\r\n\r\n");
    WebSocket ws;
    ws.sock_ = std::move(sock);
    ws.buffer_ = std::move(carry);
    ws.mask_outgoing_ = false;
    return ws;
  }

  bool open() const { return sock_.valid() && !closed_; }
  const TcpSocket& socket() const { return sock_; }

  void send_text(std::string_view payload) { send_frame(0x1, payload); }

  void close() {
    if (sock_.valid() && !closed_) {
      try {
        send_frame(0x8, "");
      } catch (const NetError&) {
      }
      closed_ = true;
    }
    sock_.close();
  }

  // Next complete message; nullopt on timeout. Close frames are acknowledged
  // and surfaced as Type::Close; pings are answered transparently.
  std::optional<WsMessage> recv_message(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    std::string assembled;
    int message_opcode = -1;
    for (;;) {
      auto frame = recv_frame(deadline);
      if (!frame) return std::nullopt;
      auto [fin, opcode, payload] = *frame;
      switch (opcode) {
        case 0x9:  // ping
          send_frame(0xA, payload);
          continue;
        case 0xA:  // pong
          continue;
        case 0x8: {
          if (!closed_) {
            try {
              send_frame(0x8, "");
            } catch (const NetError&) {
            }
            closed_ = true;
          }
          return WsMessage{WsMessage::Type::Close, {}};
        }
        case 0x0:
          if (message_opcode < 0) throw ProtocolError("continuation frame without start");
          assembled += payload;
          break;
        case 0x1:
        case 0x2:
          if (message_opcode >= 0) throw ProtocolError("new message inside fragmented message");
          message_opcode = opcode;
          assembled = std::move(payload);
          break;
        default:
          throw ProtocolError("unsupported websocket opcode " + std::to_string(opcode));
      }
      if (fin && message_opcode >= 0) {
        WsMessage msg;
        msg.type = message_opcode == 0x2 ? WsMessage::Type::Binary : WsMessage::Type::Text;
        msg.payload = std::move(assembled);
        return msg;
      }
    }
  }

 private:
  void send_frame(std::uint8_t opcode, std::string_view payload) {
    std::string frame;
    frame += static_cast<char>(0x80 | opcode);
    const size_t len = payload.size();
    std::uint8_t mask_bit = mask_outgoing_ ? 0x80 : 0x00;
    if (len < 126) {
      frame += static_cast<char>(mask_bit | static_cast<std::uint8_t>(len));
    } else if (len <= 0xFFFF) {
      frame += static_cast<char>(mask_bit | 126);
      frame += static_cast<char>((len >> 8) & 0xFF);
      frame += static_cast<char>(len & 0xFF);
    } else {
      frame += static_cast<char>(mask_bit | 127);
      for (int i = 7; i >= 0; --i)
        frame += static_cast<char>((static_cast<std::uint64_t>(len) >> (i * 8)) & 0xFF);
    }
    if (mask_outgoing_) {
      static thread_local std::mt19937 rng{std::random_device{}()};
      std::uint8_t mask[4];
      for (auto& m : mask) m = static_cast<std::uint8_t>(rng() & 0xFF);
      frame.append(reinterpret_cast<const char*>(mask), 4);
      for (size_t i = 0; i < len; ++i)
        frame += static_cast<char>(static_cast<std::uint8_t>(payload[i]) ^ mask[i % 4]);
    } else {
      frame += payload;
    }
    sock_.send_all(frame);
  }

  bool fill(size_t need, std::chrono::steady_clock::time_point deadline) {
    while (buffer_.size() < need) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) return false;
      const int remaining = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
      auto chunk = sock_.recv_some(16384, remaining);
      if (!chunk) continue;
      if (chunk->empty()) throw NetError("websocket connection closed mid-frame");
      buffer_ += *chunk;
    }
    return true;
  }

  // (fin, opcode, payload); nullopt on timeout with no partial consumption.
  std::optional<std::tuple<bool, int, std::string>> recv_frame(
      std::chrono::steady_clock::time_point deadline) {
    if (!fill(2, deadline)) return std::nullopt;
    const std::uint8_t b0 = static_cast<std::uint8_t>(buffer_[0]);
    const std::uint8_t b1 = static_cast<std::uint8_t>(buffer_[1]);
    const bool fin = b0 & 0x80;
    if (b0 & 0x70) throw ProtocolError("websocket RSV bits set");
    const int opcode = b0 & 0x0F;
    const bool masked = b1 & 0x80;
    std::uint64_t len = b1 & 0x7F;
    size_t header = 2;
    if (len == 126) {
      if (!fill(4, deadline)) return std::nullopt;
      len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buffer_[2])) << 8) |
            static_cast<std::uint8_t>(buffer_[3]);
      header = 4;
    } else if (len == 127) {
      if (!fill(10, deadline)) return std::nullopt;
      len = 0;
      for (int i = 0; i < 8; ++i)
        len = (len << 8) | static_cast<std::uint8_t>(buffer_[2 + static_cast<size_t>(i)]);
      header = 10;
    }
    if (len > (1ULL << 26)) throw ProtocolError("websocket frame too large");
    const size_t mask_len = masked ? 4 : 0;
    if (!fill(header + mask_len + len, deadline)) return std::nullopt;

    std::string payload = buffer_.substr(header + mask_len, len);
    if (masked) {
      std::uint8_t mask[4];
      std::memcpy(mask, buffer_.data() + header, 4);
      for (size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<char>(static_cast<std::uint8_t>(payload[i]) ^ mask[i % 4]);
    }
    buffer_.erase(0, header + mask_len + len);
    return std::tuple<bool, int, std::string>{fin, opcode, std::move(payload)};
  }

  TcpSocket sock_;
  std::string buffer_;
  bool mask_outgoing_ = true;
  bool closed_ = false;
};

}  // namespace droidmeter::net
