#pragma once

// HTTP Archive (HAR 1.2) assembly from a recorded network-event trace, plus
// the page-load-time figure. Response bodies are never part of the trace;
// content carries sizes and mime types only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "droidmeter/network_event.hpp"

namespace droidmeter {

constexpr const char* kCreatorName = "droidmeter";
constexpr const char* kCreatorVersion = "0.1.0";

struct HarEntry {
  std::string started_date_time;
  double time = 0;  // ms; sum of non-negative phases (ssl counted inside connect)
  std::string method;
  std::string url;
  Headers request_headers;
  int status = 0;
  std::string status_text;
  Headers response_headers;
  std::string mime_type;
  double content_size = 0;
  double body_size = -1;
  TimingDetail timings;
  std::string error;  // nonempty for failed loads
};

struct HarPage {
  std::string id;
  std::string started_date_time;
  std::string title;
  std::optional<double> on_load_ms;
};

struct HarLog {
  std::string version = "1.2";
  std::vector<HarPage> pages;
  std::vector<HarEntry> entries;
};

// (LoadEventFired - first RequestWillBeSent) in ms, rounded; absent when
// either endpoint event is missing.
inline std::optional<std::int64_t> page_load_time(std::span<const NetworkEvent> events) {
  std::optional<double> first_request;
  std::optional<double> load_fired;
  for (const NetworkEvent& ev : events) {
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent && !first_request)
      first_request = ev.timestamp;
    if (ev.kind == NetworkEvent::Kind::LoadEventFired && !load_fired)
      load_fired = ev.timestamp;
  }
  if (!first_request || !load_fired) return std::nullopt;
  return static_cast<std::int64_t>(std::llround((*load_fired - *first_request) * 1000.0));
}

namespace detail {

// ISO 8601 UTC with milliseconds, e.g. 2024-03-09T16:00:00.123Z
inline std::string iso8601(double epoch_seconds) {
  if (epoch_seconds < 0) epoch_seconds = 0;
  const auto whole = static_cast<std::time_t>(epoch_seconds);
  const int millis =
      static_cast<int>(std::llround((epoch_seconds - static_cast<double>(whole)) * 1000.0)) % 1000;
  std::tm tm{};
  gmtime_r(&whole, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                millis < 0 ? 0 : millis);
  return buf;
}

struct RequestRecord {
  const NetworkEvent* sent = nullptr;
  const NetworkEvent* response = nullptr;
  const NetworkEvent* finished = nullptr;
  const NetworkEvent* failed = nullptr;
  double data_length = 0;
  size_t order = 0;
};

inline double round_ms(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace detail

// Groups events by request id; every request with both an announcement and a
// terminal event becomes one entry. Events for never-announced ids are
// orphans: skipped with a warning. The first event carrying wall_time anchors
// monotonic timestamps to the wall clock; with no wall time anywhere the
// anchor falls back to the epoch.
inline HarLog build_har(std::span<const NetworkEvent> events, const std::string& page_title) {
  HarLog har;

  std::optional<double> wall_anchor;  // wall seconds at monotonic t=0
  for (const NetworkEvent& ev : events) {
    if (ev.wall_time) {
      wall_anchor = *ev.wall_time - ev.timestamp;
      break;
    }
  }
  const double anchor = wall_anchor.value_or(0.0);

  std::map<std::string, detail::RequestRecord> requests;
  std::vector<std::string> order;
  std::optional<double> first_request_ts;
  std::optional<double> load_fired_ts;

  for (const NetworkEvent& ev : events) {
    if (ev.kind == NetworkEvent::Kind::LoadEventFired) {
      if (!load_fired_ts) load_fired_ts = ev.timestamp;
      continue;
    }
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent) {
      if (!requests.count(ev.request_id)) {
        requests[ev.request_id].order = order.size();
        order.push_back(ev.request_id);
      }
      requests[ev.request_id].sent = &ev;
      if (!first_request_ts) first_request_ts = ev.timestamp;
      continue;
    }
    auto it = requests.find(ev.request_id);
    if (it == requests.end() || !it->second.sent) {
      std::cerr << "[warn] orphan " << kind_name(ev.kind) << " for request '" << ev.request_id
                << "' skipped\n";
      continue;
    }
    switch (ev.kind) {
      case NetworkEvent::Kind::ResponseReceived: it->second.response = &ev; break;
      case NetworkEvent::Kind::DataReceived: it->second.data_length += ev.encoded_data_length; break;
      case NetworkEvent::Kind::LoadingFinished: it->second.finished = &ev; break;
      case NetworkEvent::Kind::LoadingFailed: it->second.failed = &ev; break;
      default: break;
    }
  }

  HarPage page;
  page.id = "page_1";
  page.title = page_title;
  page.started_date_time =
      detail::iso8601(anchor + (first_request_ts ? *first_request_ts : 0.0));
  if (first_request_ts && load_fired_ts)
    page.on_load_ms = detail::round_ms((*load_fired_ts - *first_request_ts) * 1000.0);
  har.pages.push_back(page);

  for (const std::string& id : order) {
    const detail::RequestRecord& rec = requests[id];
    const NetworkEvent* terminal = rec.failed ? rec.failed : rec.finished;
    if (!terminal) continue;  // never completed; no entry

    HarEntry entry;
    entry.started_date_time = detail::iso8601(anchor + rec.sent->timestamp);
    entry.method = rec.sent->method.empty() ? "GET" : rec.sent->method;
    entry.url = rec.sent->url;
    entry.request_headers = rec.sent->request_headers;

    TimingDetail t;
    if (rec.response) {
      entry.status = rec.response->status;
      entry.status_text = rec.response->status_text;
      entry.response_headers = rec.response->response_headers;
      entry.mime_type = rec.response->mime_type;
      if (rec.response->timing) t = *rec.response->timing;
      const double wall_to_response = (rec.response->timestamp - rec.sent->timestamp) * 1000.0;
      const double wall_receive = (terminal->timestamp - rec.response->timestamp) * 1000.0;
      if (t.wait < 0) {
        double known = 0;
        for (double phase : {t.blocked, t.dns, t.connect, t.send})
          if (phase > 0) known += phase;
        t.wait = std::max(0.0, wall_to_response - known);
      }
      if (t.receive < 0) t.receive = std::max(0.0, wall_receive);
    } else {
      // failed before any response: the whole duration is spent waiting
      entry.status = 0;
      t.wait = std::max(0.0, (terminal->timestamp - rec.sent->timestamp) * 1000.0);
    }
    if (rec.failed) entry.error = rec.failed->error_text;

    entry.timings = t;
    double total = 0;  // ssl excluded: it is already inside connect
    for (double phase : {t.blocked, t.dns, t.connect, t.send, t.wait, t.receive})
      if (phase > 0) total += phase;
    entry.time = detail::round_ms(total);

    entry.content_size = rec.data_length;
    if (rec.finished && rec.finished->encoded_data_length > 0)
      entry.body_size = rec.finished->encoded_data_length;

    har.entries.push_back(std::move(entry));
  }

  return har;
}

// --- JSON rendering -----------------------------------------------------------

namespace detail {

inline nlohmann::json har_headers(const Headers& headers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, value] : headers)
    arr.push_back({{"name", name}, {"value", value}});
  return arr;
}

inline nlohmann::json har_query_string(const std::string& url) {
  nlohmann::json arr = nlohmann::json::array();
  auto qpos = url.find('?');
  if (qpos == std::string::npos) return arr;
  std::string query = url.substr(qpos + 1);
  if (auto hash = query.find('#'); hash != std::string::npos) query.resize(hash);
  size_t start = 0;
  while (start <= query.size()) {
    size_t end = query.find('&', start);
    if (end == std::string::npos) end = query.size();
    std::string pair = query.substr(start, end - start);
    if (!pair.empty()) {
      auto eq = pair.find('=');
      if (eq == std::string::npos)
        arr.push_back({{"name", pair}, {"value", ""}});
      else
        arr.push_back({{"name", pair.substr(0, eq)}, {"value", pair.substr(eq + 1)}});
    }
    start = end + 1;
  }
  return arr;
}

inline double timing_or_minus1(double v) { return v < 0 ? -1 : round_ms(v); }

}  // namespace detail

inline nlohmann::json to_json(const HarLog& har) {
  nlohmann::json log;
  log["version"] = har.version;
  log["creator"] = {{"name", kCreatorName}, {"version", kCreatorVersion}};

  nlohmann::json pages = nlohmann::json::array();
  for (const HarPage& page : har.pages) {
    nlohmann::json jp;
    jp["startedDateTime"] = page.started_date_time;
    jp["id"] = page.id;
    jp["title"] = page.title;
    jp["pageTimings"] = {{"onContentLoad", -1},
                         {"onLoad", page.on_load_ms ? nlohmann::json(*page.on_load_ms)
                                                    : nlohmann::json(-1)}};
    pages.push_back(std::move(jp));
  }
  log["pages"] = std::move(pages);

  nlohmann::json entries = nlohmann::json::array();
  for (const HarEntry& e : har.entries) {
    nlohmann::json je;
    je["pageref"] = "page_1";
    je["startedDateTime"] = e.started_date_time;
    je["time"] = e.time;
    je["request"] = {{"method", e.method},
                     {"url", e.url},
                     {"httpVersion", "HTTP/1.1"},
                     {"cookies", nlohmann::json::array()},
                     {"headers", detail::har_headers(e.request_headers)},
                     {"queryString", detail::har_query_string(e.url)},
                     {"headersSize", -1},
                     {"bodySize", -1}};
    je["response"] = {{"status", e.status},
                      {"statusText", e.status_text},
                      {"httpVersion", "HTTP/1.1"},
                      {"cookies", nlohmann::json::array()},
                      {"headers", detail::har_headers(e.response_headers)},
                      {"content", {{"size", e.content_size}, {"mimeType", e.mime_type}}},
                      {"redirectURL", ""},
                      {"headersSize", -1},
                      {"bodySize", e.body_size}};
    je["cache"] = nlohmann::json::object();
    je["timings"] = {{"blocked", detail::timing_or_minus1(e.timings.blocked)},
                     {"dns", detail::timing_or_minus1(e.timings.dns)},
                     {"connect", detail::timing_or_minus1(e.timings.connect)},
                     {"send", detail::timing_or_minus1(e.timings.send)},
                     {"wait", detail::timing_or_minus1(e.timings.wait)},
                     {"receive", detail::timing_or_minus1(e.timings.receive)},
                     {"ssl", detail::timing_or_minus1(e.timings.ssl)}};
    if (!e.error.empty()) je["comment"] = "_error: " + e.error;
    entries.push_back(std::move(je));
  }
  log["entries"] = std::move(entries);

  return nlohmann::json{{"log", std::move(log)}};
}

}  // namespace droidmeter
