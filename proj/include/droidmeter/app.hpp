#pragma once

// Front door used by the CLI: explore / replay / measure pipelines, the
// runtime command port, and the output-folder layout:
//
//   output_dir/
//     model.json
//     script_<hex>.json
//     states/<hex>/info.json [+ screenshot.png]
//     runs/<hex>/{page.har, metrics.json, replay_<hex>.json}

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "droidmeter/collector.hpp"
#include "droidmeter/config.hpp"
#include "droidmeter/explorer.hpp"
#include "droidmeter/har.hpp"
#include "droidmeter/metrics.hpp"
#include "droidmeter/replayer.hpp"
#include "droidmeter/scenario.hpp"
#include "droidmeter/shell_device.hpp"
#include "droidmeter/sim_device.hpp"

namespace droidmeter {

inline std::unique_ptr<DeviceAdapter> make_adapter(const Config& config) {
  if (config.is_simulated()) {
    Scenario scenario = load_scenario(config.scenario_path());
    return std::make_unique<SimDevice>(std::move(scenario), config.rng_seed.value_or(0));
  }
  return std::make_unique<ShellDevice>(config.device, std::make_shared<SystemCommandRunner>());
}

// Line-oriented TCP command port. `save` snapshots the in-flight exploration
// at the next between-events boundary and answers `ok`.
class CommandListener {
 public:
  CommandListener(std::uint16_t port, ExploreControl& control)
      : listener_(net::TcpListener::bind(port)), control_(control) {
    thread_ = std::thread([this] { serve(); });
  }

  ~CommandListener() { stop(); }

  void stop() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
    listener_.close();
  }

  std::uint16_t port() const { return listener_.port(); }

 private:
  void serve() {
    while (!stop_.load()) {
      std::optional<net::TcpSocket> client;
      try {
        client = listener_.accept(100);
      } catch (const NetError&) {
        return;
      }
      if (!client) continue;
      try {
        handle(*client);
      } catch (const NetError&) {
        // client went away; keep listening
      }
    }
  }

  void handle(net::TcpSocket& sock) {
    std::string buffer;
    while (!stop_.load()) {
      auto chunk = sock.recv_some(1024, 100);
      if (!chunk) continue;
      if (chunk->empty()) return;  // client closed
      buffer += *chunk;
      size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "save") {
          const bool done = control_.request_snapshot_and_wait(std::chrono::seconds(30));
          sock.send_all(done ? "ok\n" : "err timeout\n");
        } else {
          sock.send_all("err unknown\n");
        }
      }
    }
  }

  net::TcpListener listener_;
  ExploreControl& control_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
};

namespace detail {

inline ExploreControl*& signal_target() {
  static ExploreControl* target = nullptr;
  return target;
}

extern "C" inline void handle_sigint(int) {
  if (ExploreControl* control = signal_target()) control->request_stop();
}

inline void write_text(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << bytes;
}

}  // namespace detail

// Exit codes: 0 success (including budget stop and Ctrl-C), 2 partial model
// after a device failure, 1 fatal error.
inline int run_explore(const Config& config) {
  std::unique_ptr<DeviceAdapter> adapter;
  try {
    adapter = make_adapter(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  ExploreControl control;
  std::unique_ptr<CommandListener> listener;
  try {
    listener = std::make_unique<CommandListener>(static_cast<std::uint16_t>(config.command_port),
                                                 control);
  } catch (const PortInUse& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "[explore] command port listening on " << listener->port() << "\n";

  detail::signal_target() = &control;
  auto previous_handler = std::signal(SIGINT, detail::handle_sigint);

  ExploreConfig explore_config;
  explore_config.app_id = config.app_id;
  explore_config.max_explore_ms = config.max_explore_ms;
  explore_config.max_depth = config.max_depth;
  explore_config.dump_retry = config.dump_retry;
  explore_config.output_dir = config.output_dir;
  explore_config.event_delay_ms = config.event_delay_ms;

  int exit_code = 0;
  try {
    ExploreResult result = explore(*adapter, explore_config, &control);
    save_results(result.model, result.scripts, config.output_dir, result.screenshots,
                 !result.aborted);
    if (control.snapshot_pending()) control.mark_snapshot_done();
    std::cout << "[explore] " << result.model.states().size() << " pages discovered, "
              << result.scripts.size() << " embedded-page script(s), results in "
              << config.output_dir << "\n";
    if (result.aborted) {
      std::cerr << "[explore] model is partial: " << result.abort_reason << "\n";
      exit_code = 2;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    exit_code = 1;
  }

  std::signal(SIGINT, previous_handler);
  detail::signal_target() = nullptr;
  listener->stop();
  return exit_code;
}

namespace detail {

inline nlohmann::json metrics_json(const std::vector<FrameSample>& frames,
                                   const std::vector<NetworkEvent>& events,
                                   const std::vector<ActivityTiming>& timings) {
  nlohmann::json j;
  if (!frames.empty())
    j["speed_index_ms"] = speed_index(frames);
  else
    j["speed_index_ms"] = nullptr;
  if (auto plt = page_load_time(events))
    j["page_load_time_ms"] = *plt;
  else
    j["page_load_time_ms"] = nullptr;
  if (!timings.empty()) {
    const ActivityTiming& t = timings.back();  // last activity entered = target
    nlohmann::json activity;
    activity["name"] = t.activity_name;
    activity["oncreate_ms"] = t.oncreate_ms();
    if (auto drawn = t.fully_drawn_ms())
      activity["fully_drawn_ms"] = *drawn;
    else
      activity["fully_drawn_ms"] = nullptr;
    j["activity"] = std::move(activity);
  } else {
    j["activity"] = nullptr;
  }
  return j;
}

}  // namespace detail

// Exit codes: 0 target reached (outputs written), 3 unreachable, 1 device or
// input error.
inline int run_replay(const Config& config, const std::filesystem::path& script_path) {
  ReplayScript script;
  std::unique_ptr<DeviceAdapter> adapter;
  try {
    script = load_script(script_path);
    adapter = make_adapter(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::cout << "[replay] script " << script_path.string() << " -> target "
            << to_hex(script.target) << " (" << script.steps.size() << " steps)\n";

  std::shared_ptr<LogStream> log;
  if (adapter->capabilities().count(Capability::LogStream)) log = adapter->log_stream();

  std::atomic<bool> cancel_collect{false};
  std::future<CollectResult> collected;
  std::vector<FrameSample> frames;
  const bool can_collect = adapter->capabilities().count(Capability::PortForward) > 0;
  const bool can_capture = adapter->capabilities().count(Capability::FrameCapture) > 0;

  MeasurementHooks hooks;
  hooks.before = [&] {
    if (!can_collect) return;
    try {
      std::string remote = "localabstract:webview_devtools_remote_0";
      if (auto* shell = dynamic_cast<ShellDevice*>(adapter.get())) {
        (void)shell;  // on hardware the remote socket carries the app pid
        remote = "localabstract:webview_devtools_remote_" + config.app_id;
      }
      DebugEndpoint endpoint = adapter->forward_debug_port(remote, 0);
      CollectOptions options;
      options.quiescence_ms = config.quiescence_ms;
      options.max_wait_ms = config.max_wait_ms;
      options.cancel = &cancel_collect;
      collected = std::async(std::launch::async,
                             [endpoint, options] { return collect(endpoint, options); });
    } catch (const Error& e) {
      std::cerr << "[replay] measurement disabled: " << e.what() << "\n";
    }
  };
  hooks.after = [&] {
    if (!can_capture) return;
    try {
      frames = adapter->capture_frames(config.max_wait_ms);
    } catch (const Error& e) {
      std::cerr << "[replay] frame capture failed: " << e.what() << "\n";
    }
  };

  ReplayOutcome outcome = replay(*adapter, script, config.retry_limit, hooks, config.dump_retry);

  CollectResult trace;
  if (collected.valid()) {
    if (outcome.status != ReplayOutcome::Status::Reached) cancel_collect.store(true);
    trace = collected.get();
    if (trace.connection_lost)
      std::cerr << "[replay] debug connection lost; trace is partial\n";
  }

  const std::filesystem::path run_dir =
      std::filesystem::path(config.output_dir) / "runs" / to_hex(script.target);
  std::error_code ec;
  std::filesystem::create_directories(run_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create " << run_dir << ": " << ec.message() << "\n";
    return 1;
  }

  detail::write_text(run_dir / ("replay_" + to_hex(script.target) + ".json"),
                     to_json(outcome).dump(2) + "\n");

  std::cout << "[replay] " << status_name(outcome.status) << " after "
            << outcome.steps_executed << " steps, " << outcome.retries_used << " retries, "
            << outcome.duration_ms << " ms\n";

  if (outcome.status != ReplayOutcome::Status::Reached)
    return outcome.status == ReplayOutcome::Status::Unreachable ? 3 : 1;

  std::string page_title = to_hex(script.target);
  for (const NetworkEvent& ev : trace.events)
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent) {
      page_title = ev.url;
      break;
    }
  HarLog har = build_har(trace.events, page_title);
  detail::write_text(run_dir / "page.har", to_json(har).dump(2) + "\n");

  std::vector<ActivityTiming> timings;
  if (log) timings = parse_activity_timing(log->drain());
  detail::write_text(run_dir / "metrics.json",
                     detail::metrics_json(frames, trace.events, timings).dump(2) + "\n");

  std::cout << "[replay] " << har.entries.size() << " network entries, outputs in "
            << run_dir.string() << "\n";
  return 0;
}

// Replays every script in the output folder. 1 trumps 3 trumps 0 so the exit
// code reports the worst failure observed.
inline int run_measure(const Config& config) {
  namespace fs = std::filesystem;
  std::vector<fs::path> scripts;
  std::error_code ec;
  for (auto it = fs::directory_iterator(config.output_dir, ec);
       !ec && it != fs::directory_iterator(); ++it) {
    const std::string name = it->path().filename().string();
    if (name.rfind("script_", 0) == 0 && name.size() > 5 &&
        name.compare(name.size() - 5, 5, ".json") == 0)
      scripts.push_back(it->path());
  }
  if (ec) {
    std::cerr << "error: cannot read " << config.output_dir << ": " << ec.message() << "\n";
    return 1;
  }
  if (scripts.empty()) {
    std::cerr << "error: no script_*.json in " << config.output_dir << " (explore first)\n";
    return 1;
  }
  std::sort(scripts.begin(), scripts.end());

  int worst = 0;
  for (const fs::path& path : scripts) {
    const int code = run_replay(config, path);
    if (code == 1 || worst == 1)
      worst = 1;
    else if (code != 0)
      worst = code;
  }
  return worst;
}

}  // namespace droidmeter
