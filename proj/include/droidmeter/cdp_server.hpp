#pragma once

// Debug endpoint served by the simulated device behind forward_debug_port:
// an HTTP /json target listing plus a WebSocket session speaking the
// notification subset the collector consumes. Page-load traffic is pushed
// when the device enters a page, mirroring how a real embedded page starts
// loading on navigation.

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"
#include "droidmeter/net/socket.hpp"
#include "droidmeter/net/websocket.hpp"
#include "droidmeter/network_event.hpp"

namespace droidmeter {

class CdpDebugServer {
 public:
  explicit CdpDebugServer(std::uint16_t port, std::string title)
      : listener_(net::TcpListener::bind(port)), title_(std::move(title)) {
    thread_ = std::thread([this] { serve(); });
  }

  CdpDebugServer(const CdpDebugServer&) = delete;
  CdpDebugServer& operator=(const CdpDebugServer&) = delete;

  ~CdpDebugServer() { stop(); }

  std::uint16_t port() const { return listener_.port(); }

  void stop() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
    listener_.close();
  }

  // Called by the device on every page entry. While a subscriber is enabled
  // the trace streams out immediately; otherwise it is held as the current
  // page's traffic and flushed when a subscriber enables the Network domain.
  void page_entered(const std::vector<NetworkEvent>& trace) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (enabled_) {
      for (const NetworkEvent& ev : trace) outgoing_.push_back(ev);
    } else {
      pending_ = trace;
    }
  }

 private:
  void serve() {
    while (!stop_.load()) {
      std::optional<net::TcpSocket> client;
      try {
        client = listener_.accept(100);
      } catch (const NetError&) {
        break;
      }
      if (!client) continue;
      try {
        handle_connection(std::move(*client));
      } catch (const Error&) {
        // a broken client connection must not take the endpoint down
      }
    }
  }

  void handle_connection(net::TcpSocket sock) {
    std::string carry;
    net::HttpRequest req = net::read_http_request(sock, carry, 5000);

    const bool upgrade = req.headers.count("sec-websocket-key") > 0;
    if (!upgrade) {
      if (req.path == "/json" || req.path == "/json/list") {
        nlohmann::json listing = nlohmann::json::array();
        listing.push_back({{"description", ""},
                           {"devtoolsFrontendUrl", ""},
                           {"id", "1"},
                           {"title", title_},
                           {"type", "page"},
                           {"url", "about:blank"},
                           {"webSocketDebuggerUrl", "ws://127.0.0.1:" + std::to_string(port()) +
                                                        "/devtools/page/1"}});
        net::send_http_response(sock, 200, "OK", "application/json", listing.dump());
      } else if (req.path == "/json/version") {
        nlohmann::json version = {{"Browser", "droidmeter-sim"}, {"Protocol-Version", "1.3"}};
        net::send_http_response(sock, 200, "OK", "application/json", version.dump());
      } else {
        net::send_http_response(sock, 404, "Not Found", "text/plain", "not found");
      }
      return;
    }

    net::WebSocket ws = net::WebSocket::accept(std::move(sock), req, std::move(carry));
    session(ws);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      enabled_ = false;
      outgoing_.clear();
    }
  }

  void session(net::WebSocket& ws) {
    while (!stop_.load() && ws.open()) {
      // incoming commands
      std::optional<net::WsMessage> msg;
      try {
        msg = ws.recv_message(20);
      } catch (const NetError&) {
        return;
      }
      if (msg) {
        if (msg->type == net::WsMessage::Type::Close) return;
        auto parsed = nlohmann::json::parse(msg->payload, nullptr, false);
        if (!parsed.is_discarded() && parsed.contains("id")) {
          nlohmann::json reply = {{"id", parsed["id"]}, {"result", nlohmann::json::object()}};
          try {
            ws.send_text(reply.dump());
          } catch (const NetError&) {
            return;
          }
          if (parsed.value("method", "") == "Network.enable") {
            std::lock_guard<std::mutex> lock(mutex_);
            enabled_ = true;
            for (const NetworkEvent& ev : pending_) outgoing_.push_back(ev);
            pending_.clear();
          }
        }
      }
      // outgoing notifications
      std::vector<NetworkEvent> batch;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        batch.swap(outgoing_);
      }
      for (const NetworkEvent& ev : batch) {
        try {
          ws.send_text(event_to_cdp(ev).dump());
        } catch (const NetError&) {
          return;
        }
      }
    }
  }

  net::TcpListener listener_;
  std::string title_;
  std::thread thread_;
  std::atomic<bool> stop_{false};

  std::mutex mutex_;
  bool enabled_ = false;
  std::vector<NetworkEvent> pending_;   // current page's traffic, pre-subscription
  std::vector<NetworkEvent> outgoing_;  // queued notifications for the live session
};

}  // namespace droidmeter
