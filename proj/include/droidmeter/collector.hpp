#pragma once

// Debug-protocol client: discovers the page target behind a forwarded local
// port, subscribes to the Network domain (plus Page.loadEventFired), and
// records the notification stream for one embedded page load.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"
#include "droidmeter/network_event.hpp"
#include "droidmeter/net/websocket.hpp"

namespace droidmeter {

struct DebugEndpoint {
  std::string host;
  std::uint16_t port = 0;
};

struct CollectResult {
  std::vector<NetworkEvent> events;
  bool connection_lost = false;
};

struct CollectOptions {
  std::int64_t quiescence_ms = 2000;
  std::int64_t max_wait_ms = 30000;
  const std::atomic<bool>* cancel = nullptr;  // optional early-out
};

namespace detail {

// Target discovery via the endpoint's /json listing. The listing may lag the
// port forward by a moment, so poll until the deadline.
inline std::string discover_ws_path(const DebugEndpoint& endpoint,
                                    std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    try {
      auto [status, body] = net::http_get(endpoint.host, endpoint.port, "/json", 2000);
      if (status == 200) {
        auto listing = nlohmann::json::parse(body, nullptr, false);
        if (!listing.is_discarded() && listing.is_array()) {
          for (const auto& target : listing) {
            if (!target.contains("webSocketDebuggerUrl")) continue;
            if (target.value("type", "page") != "page") continue;
            std::string url = target["webSocketDebuggerUrl"].get<std::string>();
            // ws://host:port/path -> /path
            auto scheme = url.find("://");
            if (scheme == std::string::npos) continue;
            auto slash = url.find('/', scheme + 3);
            return slash == std::string::npos ? "/" : url.substr(slash);
          }
        }
      }
    } catch (const NetError&) {
      // endpoint not up yet
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw NetError("no debuggable page target at " + endpoint.host + ":" +
                     std::to_string(endpoint.port));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace detail

// Subscribes and records until the stream has been quiet for quiescence_ms
// after the load event fired, or until max_wait_ms elapses. A dropped
// connection returns the partial list with connection_lost set.
inline CollectResult collect(const DebugEndpoint& endpoint, const CollectOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto hard_deadline = start + std::chrono::milliseconds(options.max_wait_ms);

  CollectResult result;

  net::WebSocket ws;
  try {
    const std::string path = detail::discover_ws_path(endpoint, hard_deadline);
    ws = net::WebSocket::connect(endpoint.host, endpoint.port, path);
    ws.send_text(R"({"id":1,"method":"Network.enable"})");
    ws.send_text(R"({"id":2,"method":"Page.enable"})");
  } catch (const NetError&) {
    result.connection_lost = true;
    return result;
  }

  bool load_fired = false;
  auto last_event_at = clock::now();

  for (;;) {
    const auto now = clock::now();
    if (now >= hard_deadline) break;
    if (options.cancel && options.cancel->load()) break;
    if (load_fired) {
      const auto quiet_deadline =
          last_event_at + std::chrono::milliseconds(options.quiescence_ms);
      if (now >= quiet_deadline) break;
    }

    std::optional<net::WsMessage> msg;
    try {
      msg = ws.recv_message(100);
    } catch (const NetError&) {
      result.connection_lost = true;
      break;
    }
    if (!msg) continue;
    if (msg->type == net::WsMessage::Type::Close) {
      if (!load_fired) result.connection_lost = true;
      break;
    }

    nlohmann::json parsed = nlohmann::json::parse(msg->payload, nullptr, false);
    if (parsed.is_discarded())
      throw ProtocolError("malformed debug-protocol frame: " + msg->payload.substr(0, 120));
    if (parsed.contains("id")) continue;  // command reply
    if (auto event = cdp_to_event(parsed)) {
      if (event->kind == NetworkEvent::Kind::LoadEventFired) load_fired = true;
      result.events.push_back(std::move(*event));
      last_event_at = clock::now();
    }
  }

  ws.close();
  return result;
}

}  // namespace droidmeter
