#pragma once

// Network-domain debug-protocol events, plus their two encodings: the wire
// form used by the remote-debugging protocol (method + params notifications)
// and the flat JSON form used in scenario files and traces.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"

namespace droidmeter {

// HAR-style phase durations in ms; -1 means the phase did not happen or was
// not reported. `connect` includes `ssl`, matching the archive convention.
struct TimingDetail {
  double blocked = -1;
  double dns = -1;
  double connect = -1;
  double ssl = -1;
  double send = -1;
  double wait = -1;
  double receive = -1;

  bool operator==(const TimingDetail&) const = default;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

struct NetworkEvent {
  enum class Kind {
    RequestWillBeSent,
    ResponseReceived,
    DataReceived,
    LoadingFinished,
    LoadingFailed,
    LoadEventFired,
  };

  Kind kind = Kind::RequestWillBeSent;
  std::string request_id;           // empty for LoadEventFired
  double timestamp = 0;             // monotonic seconds, fractional
  std::optional<double> wall_time;  // epoch seconds

  // RequestWillBeSent
  std::string url;
  std::string method;
  Headers request_headers;

  // ResponseReceived
  int status = 0;
  std::string status_text;
  Headers response_headers;
  std::string mime_type;
  std::optional<TimingDetail> timing;

  // DataReceived / LoadingFinished
  double encoded_data_length = 0;

  // LoadingFailed
  std::string error_text;
};

inline std::string kind_name(NetworkEvent::Kind kind) {
  switch (kind) {
    case NetworkEvent::Kind::RequestWillBeSent: return "request_will_be_sent";
    case NetworkEvent::Kind::ResponseReceived: return "response_received";
    case NetworkEvent::Kind::DataReceived: return "data_received";
    case NetworkEvent::Kind::LoadingFinished: return "loading_finished";
    case NetworkEvent::Kind::LoadingFailed: return "loading_failed";
    case NetworkEvent::Kind::LoadEventFired: return "load_event_fired";
  }
  return "?";
}

// --- flat JSON (scenario files, saved traces) --------------------------------

namespace detail {

inline nlohmann::json headers_to_json(const Headers& headers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, value] : headers)
    arr.push_back(nlohmann::json::array({name, value}));
  return arr;
}

inline Headers headers_from_json(const nlohmann::json& j) {
  Headers headers;
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      headers.emplace_back(it.key(), it.value().get<std::string>());
  } else {
    for (const auto& pair : j)
      headers.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
  }
  return headers;
}

inline nlohmann::json timing_to_json(const TimingDetail& t) {
  nlohmann::json j;
  j["blocked"] = t.blocked;
  j["dns"] = t.dns;
  j["connect"] = t.connect;
  j["ssl"] = t.ssl;
  j["send"] = t.send;
  j["wait"] = t.wait;
  j["receive"] = t.receive;
  return j;
}

inline TimingDetail timing_from_json(const nlohmann::json& j) {
  TimingDetail t;
  auto get = [&](const char* key, double& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<double>();
  };
  get("blocked", t.blocked);
  get("dns", t.dns);
  get("connect", t.connect);
  get("ssl", t.ssl);
  get("send", t.send);
  get("wait", t.wait);
  get("receive", t.receive);
  return t;
}

}  // namespace detail

inline nlohmann::json to_json(const NetworkEvent& ev) {
  nlohmann::json j;
  j["kind"] = kind_name(ev.kind);
  j["timestamp"] = ev.timestamp;
  if (!ev.request_id.empty()) j["request_id"] = ev.request_id;
  if (ev.wall_time) j["wall_time"] = *ev.wall_time;
  switch (ev.kind) {
    case NetworkEvent::Kind::RequestWillBeSent:
      j["url"] = ev.url;
      j["method"] = ev.method;
      j["headers"] = detail::headers_to_json(ev.request_headers);
      break;
    case NetworkEvent::Kind::ResponseReceived:
      j["status"] = ev.status;
      j["status_text"] = ev.status_text;
      j["headers"] = detail::headers_to_json(ev.response_headers);
      j["mime_type"] = ev.mime_type;
      if (ev.timing) j["timing"] = detail::timing_to_json(*ev.timing);
      break;
    case NetworkEvent::Kind::DataReceived:
    case NetworkEvent::Kind::LoadingFinished:
      j["encoded_data_length"] = ev.encoded_data_length;
      break;
    case NetworkEvent::Kind::LoadingFailed:
      j["error_text"] = ev.error_text;
      break;
    case NetworkEvent::Kind::LoadEventFired:
      break;
  }
  return j;
}

inline NetworkEvent network_event_from_json(const nlohmann::json& j) {
  NetworkEvent ev;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "request_will_be_sent") ev.kind = NetworkEvent::Kind::RequestWillBeSent;
  else if (kind == "response_received") ev.kind = NetworkEvent::Kind::ResponseReceived;
  else if (kind == "data_received") ev.kind = NetworkEvent::Kind::DataReceived;
  else if (kind == "loading_finished") ev.kind = NetworkEvent::Kind::LoadingFinished;
  else if (kind == "loading_failed") ev.kind = NetworkEvent::Kind::LoadingFailed;
  else if (kind == "load_event_fired") ev.kind = NetworkEvent::Kind::LoadEventFired;
  else throw IoError("unknown network event kind '" + kind + "'");
  ev.timestamp = j.at("timestamp").get<double>();
  if (j.contains("request_id")) ev.request_id = j["request_id"].get<std::string>();
  if (j.contains("wall_time") && !j["wall_time"].is_null())
    ev.wall_time = j["wall_time"].get<double>();
  if (j.contains("url")) ev.url = j["url"].get<std::string>();
  if (j.contains("method")) ev.method = j["method"].get<std::string>();
  if (j.contains("status")) ev.status = j["status"].get<int>();
  if (j.contains("status_text")) ev.status_text = j["status_text"].get<std::string>();
  if (j.contains("mime_type")) ev.mime_type = j["mime_type"].get<std::string>();
  if (j.contains("timing") && !j["timing"].is_null())
    ev.timing = detail::timing_from_json(j["timing"]);
  if (j.contains("encoded_data_length"))
    ev.encoded_data_length = j["encoded_data_length"].get<double>();
  if (j.contains("error_text")) ev.error_text = j["error_text"].get<std::string>();
  if (j.contains("headers")) {
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent)
      ev.request_headers = detail::headers_from_json(j["headers"]);
    else
      ev.response_headers = detail::headers_from_json(j["headers"]);
  }
  return ev;
}

// --- debug-protocol wire form -------------------------------------------------

namespace detail {

inline nlohmann::json headers_to_cdp(const Headers& headers) {
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& [name, value] : headers) obj[name] = value;
  return obj;
}

inline Headers headers_from_cdp(const nlohmann::json& obj) {
  Headers headers;
  for (auto it = obj.begin(); it != obj.end(); ++it)
    headers.emplace_back(it.key(), it.value().get<std::string>());
  return headers;
}

}  // namespace detail

// Notification as sent by the debug endpoint: {"method": ..., "params": {...}}.
inline nlohmann::json event_to_cdp(const NetworkEvent& ev) {
  nlohmann::json msg;
  nlohmann::json& p = msg["params"];
  p["timestamp"] = ev.timestamp;
  switch (ev.kind) {
    case NetworkEvent::Kind::RequestWillBeSent: {
      msg["method"] = "Network.requestWillBeSent";
      p["requestId"] = ev.request_id;
      if (ev.wall_time) p["wallTime"] = *ev.wall_time;
      p["documentURL"] = ev.url;
      p["request"] = {{"url", ev.url},
                      {"method", ev.method},
                      {"headers", detail::headers_to_cdp(ev.request_headers)}};
      break;
    }
    case NetworkEvent::Kind::ResponseReceived: {
      msg["method"] = "Network.responseReceived";
      p["requestId"] = ev.request_id;
      nlohmann::json response = {{"status", ev.status},
                                 {"statusText", ev.status_text},
                                 {"headers", detail::headers_to_cdp(ev.response_headers)},
                                 {"mimeType", ev.mime_type}};
      if (ev.timing) {
        // Offsets in ms from requestTime, phases laid out back to back.
        const TimingDetail& t = *ev.timing;
        double cursor = t.blocked > 0 ? t.blocked : 0;
        nlohmann::json timing;
        timing["requestTime"] = ev.timestamp;  // anchor; offsets below are relative
        if (t.dns >= 0) {
          timing["dnsStart"] = cursor;
          cursor += t.dns;
          timing["dnsEnd"] = cursor;
        } else {
          timing["dnsStart"] = -1;
          timing["dnsEnd"] = -1;
        }
        if (t.connect >= 0) {
          timing["connectStart"] = cursor;
          cursor += t.connect;
          timing["connectEnd"] = cursor;
          if (t.ssl >= 0) {
            timing["sslStart"] = cursor - t.ssl;
            timing["sslEnd"] = cursor;
          } else {
            timing["sslStart"] = -1;
            timing["sslEnd"] = -1;
          }
        } else {
          timing["connectStart"] = -1;
          timing["connectEnd"] = -1;
          timing["sslStart"] = -1;
          timing["sslEnd"] = -1;
        }
        if (t.send >= 0) {
          timing["sendStart"] = cursor;
          cursor += t.send;
          timing["sendEnd"] = cursor;
        } else {
          timing["sendStart"] = -1;
          timing["sendEnd"] = -1;
        }
        timing["receiveHeadersEnd"] = t.wait >= 0 ? cursor + t.wait : cursor;
        response["timing"] = std::move(timing);
      }
      p["response"] = std::move(response);
      break;
    }
    case NetworkEvent::Kind::DataReceived:
      msg["method"] = "Network.dataReceived";
      p["requestId"] = ev.request_id;
      p["dataLength"] = ev.encoded_data_length;
      p["encodedDataLength"] = ev.encoded_data_length;
      break;
    case NetworkEvent::Kind::LoadingFinished:
      msg["method"] = "Network.loadingFinished";
      p["requestId"] = ev.request_id;
      p["encodedDataLength"] = ev.encoded_data_length;
      break;
    case NetworkEvent::Kind::LoadingFailed:
      msg["method"] = "Network.loadingFailed";
      p["requestId"] = ev.request_id;
      p["errorText"] = ev.error_text;
      break;
    case NetworkEvent::Kind::LoadEventFired:
      msg["method"] = "Page.loadEventFired";
      break;
  }
  return msg;
}

// Maps a wire notification back to a NetworkEvent; nullopt for methods
// outside the Network domain + Page.loadEventFired scope.
inline std::optional<NetworkEvent> cdp_to_event(const nlohmann::json& msg) {
  if (!msg.contains("method") || !msg.contains("params")) return std::nullopt;
  const std::string method = msg["method"].get<std::string>();
  const nlohmann::json& p = msg["params"];
  NetworkEvent ev;
  ev.timestamp = p.value("timestamp", 0.0);
  if (p.contains("requestId")) ev.request_id = p["requestId"].get<std::string>();

  if (method == "Network.requestWillBeSent") {
    ev.kind = NetworkEvent::Kind::RequestWillBeSent;
    if (p.contains("wallTime")) ev.wall_time = p["wallTime"].get<double>();
    const nlohmann::json& req = p.at("request");
    ev.url = req.value("url", "");
    ev.method = req.value("method", "GET");
    if (req.contains("headers")) ev.request_headers = detail::headers_from_cdp(req["headers"]);
    return ev;
  }
  if (method == "Network.responseReceived") {
    ev.kind = NetworkEvent::Kind::ResponseReceived;
    const nlohmann::json& resp = p.at("response");
    ev.status = resp.value("status", 0);
    ev.status_text = resp.value("statusText", "");
    ev.mime_type = resp.value("mimeType", "");
    if (resp.contains("headers")) ev.response_headers = detail::headers_from_cdp(resp["headers"]);
    if (resp.contains("timing")) {
      const nlohmann::json& t = resp["timing"];
      auto offset = [&](const char* key) { return t.value(key, -1.0); };
      TimingDetail detail;
      const double dns_start = offset("dnsStart"), dns_end = offset("dnsEnd");
      if (dns_start >= 0 && dns_end >= dns_start) {
        detail.dns = dns_end - dns_start;
        if (dns_start > 0) detail.blocked = dns_start;
      }
      const double conn_start = offset("connectStart"), conn_end = offset("connectEnd");
      if (conn_start >= 0 && conn_end >= conn_start) detail.connect = conn_end - conn_start;
      const double ssl_start = offset("sslStart"), ssl_end = offset("sslEnd");
      if (ssl_start >= 0 && ssl_end >= ssl_start) detail.ssl = ssl_end - ssl_start;
      const double send_start = offset("sendStart"), send_end = offset("sendEnd");
      if (send_start >= 0 && send_end >= send_start) detail.send = send_end - send_start;
      const double headers_end = offset("receiveHeadersEnd");
      if (send_end >= 0 && headers_end >= send_end) detail.wait = headers_end - send_end;
      ev.timing = detail;
    }
    return ev;
  }
  if (method == "Network.dataReceived") {
    ev.kind = NetworkEvent::Kind::DataReceived;
    ev.encoded_data_length = p.value("encodedDataLength", p.value("dataLength", 0.0));
    return ev;
  }
  if (method == "Network.loadingFinished") {
    ev.kind = NetworkEvent::Kind::LoadingFinished;
    ev.encoded_data_length = p.value("encodedDataLength", 0.0);
    return ev;
  }
  if (method == "Network.loadingFailed") {
    ev.kind = NetworkEvent::Kind::LoadingFailed;
    ev.error_text = p.value("errorText", "");
    return ev;
  }
  if (method == "Page.loadEventFired") {
    ev.kind = NetworkEvent::Kind::LoadEventFired;
    return ev;
  }
  return std::nullopt;
}

}  // namespace droidmeter
