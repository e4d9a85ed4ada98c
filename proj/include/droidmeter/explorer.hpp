#pragma once

// Depth-first exploration. Drives the device, builds the transition model,
// and emits a replay script the moment an embedded-page state is discovered.
// Retreat is Back-first: when the current page has nothing left to try, Back
// walks up; if Back loops or lands somewhere unknown, the app is relaunched
// and the shortest known event path is walked to the nearest page that still
// has work.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "droidmeter/device.hpp"
#include "droidmeter/errors.hpp"
#include "droidmeter/transition_model.hpp"

namespace droidmeter {

struct ExploreConfig {
  std::string app_id;
  std::int64_t max_explore_ms = 600000;
  int max_depth = 10;
  int dump_retry = 3;
  std::filesystem::path output_dir;
  std::int64_t event_delay_ms = 0;  // pacing between events; 0 for full speed
};

struct ScriptStep {
  StateFingerprint expected;
  UiEvent event;
};

struct ReplayScript {
  std::string app_id;
  StateFingerprint target;
  std::vector<ScriptStep> steps;
  std::int64_t created_at = 0;
};

inline nlohmann::json to_json(const ReplayScript& script) {
  nlohmann::json j;
  j["app_id"] = script.app_id;
  j["target"] = to_hex(script.target);
  j["created_ms"] = script.created_at;
  nlohmann::json steps = nlohmann::json::array();
  for (const ScriptStep& step : script.steps) {
    nlohmann::json js;
    js["expected"] = to_hex(step.expected);
    js["event"] = to_json(step.event);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

inline ReplayScript script_from_json(const nlohmann::json& j) {
  ReplayScript script;
  script.app_id = j.at("app_id").get<std::string>();
  auto target = parse_hex64(j.at("target").get<std::string>());
  if (!target) throw IoError("script: bad target fingerprint");
  script.target.digest = *target;
  script.created_at = j.value("created_ms", std::int64_t{0});
  for (const auto& js : j.at("steps")) {
    ScriptStep step;
    auto expected = parse_hex64(js.at("expected").get<std::string>());
    if (!expected) throw IoError("script: bad expected fingerprint");
    step.expected.digest = *expected;
    step.event = event_from_json(js.at("event"));
    script.steps.push_back(std::move(step));
  }
  return script;
}

inline ReplayScript load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open script file " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("script file " + path.string() + " is not valid JSON");
  return script_from_json(j);
}

// Coordination between the exploration loop and the command listener /
// signal handler. Snapshots are requested by any thread and serviced by modal
// exploration at the next between-events boundary.
class ExploreControl {
 public:
  void request_stop() { stop_.store(true); }
  bool stop_requested() const { return stop_.load(); }

  // Blocks until a snapshot requested now has been written, or timeout.
  bool request_snapshot_and_wait(std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lock(mutex_);
    const std::uint64_t ticket = ++requested_;
    return cv_.wait_for(lock, timeout, [&] { return served_ >= ticket; });
  }

  bool snapshot_pending() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return served_ < requested_;
  }

  void mark_snapshot_done() {
    std::lock_guard<std::mutex> lock(mutex_);
    served_ = requested_;
    cv_.notify_all();
  }

 private:
  std::atomic<bool> stop_{false};
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t requested_ = 0;
  std::uint64_t served_ = 0;
};

struct ExploreResult {
  TransitionModel model;
  std::vector<ReplayScript> scripts;
  std::map<std::uint64_t, std::vector<std::uint8_t>> screenshots;  // digest -> png
  bool exhausted = false;  // every reachable in-depth event was tried
  bool aborted = false;    // device failure forced a partial model
  std::string abort_reason;
};

// Writes model.json, one script_<hex>.json per script, and per-state
// states/<hex>/info.json (+ screenshot.png when captured). Overwrites are
// idempotent: identical inputs yield identical bytes.
inline void save_results(const TransitionModel& model, const std::vector<ReplayScript>& scripts,
                         const std::filesystem::path& output_dir,
                         const std::map<std::uint64_t, std::vector<std::uint8_t>>& screenshots,
                         bool complete = true) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output dir " + output_dir.string() + ": " + ec.message());

  auto write_file = [](const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << bytes;
  };

  nlohmann::json model_json = model.to_json();
  model_json["complete"] = complete;
  write_file(output_dir / "model.json", model_json.dump(2) + "\n");

  for (const ReplayScript& script : scripts)
    write_file(output_dir / ("script_" + to_hex(script.target) + ".json"),
               to_json(script).dump(2) + "\n");

  for (const PageState& state : model.states()) {
    const std::string hex = to_hex(state.fingerprint);
    const fs::path state_dir = output_dir / "states" / hex;
    fs::create_directories(state_dir, ec);
    if (ec) throw IoError("cannot create " + state_dir.string());
    nlohmann::json info;
    info["fingerprint"] = hex;
    info["node_count"] = state.fingerprint.node_count;
    info["activity"] = state.activity_name;
    info["has_webview"] = state.has_webview;
    info["first_seen_ms"] = state.first_seen_at;
    write_file(state_dir / "info.json", info.dump(2) + "\n");
    if (auto it = screenshots.find(state.fingerprint.digest); it != screenshots.end()) {
      std::string bytes(it->second.begin(), it->second.end());
      write_file(state_dir / "screenshot.png", bytes);
    }
  }
}

namespace detail {

class ExploreRun {
 public:
  ExploreRun(DeviceAdapter& adapter, const ExploreConfig& config, ExploreControl* control)
      : adapter_(adapter), config_(config), control_(control) {}

  ExploreResult run() {
    for (Capability cap : {Capability::UiDump, Capability::Tap, Capability::Back})
      if (!adapter_.capabilities().count(cap))
        throw Unsupported(std::string("explorer needs ") + capability_name(cap));
    screenshot_cap_ = adapter_.capabilities().count(Capability::Screenshot) > 0;

    start_ = std::chrono::steady_clock::now();
    try {
      adapter_.launch_app(config_.app_id);
      UiNode tree = dump();
      result_.model = TransitionModel::with_entry(tree, adapter_.current_activity(),
                                                  adapter_.now_ms());
      current_ = result_.model.entry();
      on_state_entered(current_, true);
      loop();
    } catch (const DumpFailed& e) {
      result_.aborted = true;
      result_.abort_reason = std::string("dump failed: ") + e.what();
      std::cerr << "[explore] aborted: " << result_.abort_reason << "\n";
    }
    return std::move(result_);
  }

 private:
  using clock = std::chrono::steady_clock;

  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start_).count();
  }

  UiNode dump() { return parse_ui_dump(dump_ui_with_retry(adapter_, config_.dump_retry + 1)); }

  void pace() {
    if (config_.event_delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.event_delay_ms));
  }

  // true when the outer loop should stop
  bool between_events() {
    if (control_ && control_->snapshot_pending()) {
      save_results(result_.model, result_.scripts, config_.output_dir, result_.screenshots,
                   !result_.aborted);
      control_->mark_snapshot_done();
      std::cout << "[explore] snapshot saved to " << config_.output_dir.string() << "\n";
    }
    if (control_ && control_->stop_requested()) return true;
    if (elapsed_ms() >= config_.max_explore_ms) {
      std::cout << "[explore] exploration budget reached\n";
      return true;
    }
    return false;
  }

  void on_state_entered(const StateFingerprint& fp, bool is_new) {
    if (!is_new) return;
    const PageState* state = result_.model.find_state(fp);
    std::cout << "[explore] new page " << to_hex(fp) << " activity=" << state->activity_name
              << (state->has_webview ? " (embedded web page)" : "") << "\n";
    if (screenshot_cap_) {
      try {
        result_.screenshots[fp.digest] = adapter_.screenshot();
        result_.model.set_screenshot_ref(fp, "states/" + to_hex(fp) + "/screenshot.png");
      } catch (const Error&) {
        // best effort; never aborts exploration
      }
    }
    if (state->has_webview && !script_targets_.count(fp.digest)) {
      ReplayScript script;
      script.app_id = config_.app_id;
      script.target = fp;
      script.created_at = adapter_.now_ms();
      for (auto& [from, event] : result_.model.shortest_event_path(fp))
        script.steps.push_back({from, event});
      std::cout << "[explore] replay script for " << to_hex(fp) << " ("
                << script.steps.size() << " steps)\n";
      script_targets_.insert(fp.digest);
      result_.scripts.push_back(std::move(script));
    }
  }

  // Fires an event from the current page and folds the observation into the
  // model. Returns the landed state.
  StateFingerprint observe(const StateFingerprint& from, const UiEvent& event) {
    pace();
    adapter_.inject(event);
    UiNode tree = dump();
    try {
      auto obs = result_.model.add_observation(from, event, tree, adapter_.current_activity(),
                                               adapter_.now_ms());
      on_state_entered(obs.to, obs.is_new_state);
      return obs.to;
    } catch (const NondeterministicEdge& e) {
      std::cerr << "[explore] nondeterministic edge: " << e.what() << "\n";
      const StateFingerprint observed = fingerprint(tree);
      if (const PageState* s = result_.model.find_state(observed))
        return s->fingerprint;
      return observed;
    }
  }

  struct Eligibility {
    std::optional<StateFingerprint> nearest;  // closest to entry with pending events
    bool current_eligible = false;
    bool any = false;
  };

  Eligibility eligibility() {
    auto [dist, parent] = result_.model.bfs_from_entry();
    (void)parent;
    Eligibility e;
    int best = -1;
    for (const PageState& s : result_.model.states()) {
      if (s.unexplored_events.empty()) continue;
      if (stuck_.count(s.fingerprint.digest)) continue;
      auto it = dist.find(s.fingerprint.digest);
      if (it == dist.end() || it->second >= config_.max_depth) continue;
      e.any = true;
      if (s.fingerprint == current_) e.current_eligible = true;
      if (best < 0 || it->second < best) {
        best = it->second;
        e.nearest = s.fingerprint;
      }
    }
    return e;
  }

  void loop() {
    size_t retreats_in_a_row = 0;
    while (true) {
      if (between_events()) return;

      Eligibility elig = eligibility();
      if (!elig.any) {
        result_.exhausted = true;
        std::cout << "[explore] no unexplored events remain\n";
        return;
      }

      if (elig.current_eligible) {
        auto event = result_.model.pop_unexplored(current_);
        if (event) {
          current_ = observe(current_, *event);
          retreats_in_a_row = 0;
          continue;
        }
      }

      // retreat
      ++retreats_in_a_row;
      const bool force_relaunch = retreats_in_a_row > result_.model.states().size() + 2;
      if (!force_relaunch) {
        const StateFingerprint before = current_;
        const size_t states_before = result_.model.states().size();
        current_ = observe(current_, UiEvent::back());
        const bool landed_new = result_.model.states().size() > states_before;
        if (current_ != before && !landed_new) continue;  // walked up to a known page
      }
      if (between_events()) return;
      if (!relaunch_and_walk(*elig.nearest)) return;
    }
  }

  // Relaunches and walks the shortest known path toward the target page.
  // Returns false when exploration cannot continue.
  bool relaunch_and_walk(const StateFingerprint& target) {
    adapter_.launch_app(config_.app_id);
    UiNode tree = dump();
    StateFingerprint fp = fingerprint(tree);
    if (fp != result_.model.entry()) {
      if (const PageState* s = result_.model.find_state(fp)) {
        current_ = s->fingerprint;
        return true;
      }
      result_.aborted = true;
      result_.abort_reason = "relaunch landed on an unknown page " + to_hex(fp);
      std::cerr << "[explore] " << result_.abort_reason << "\n";
      return false;
    }
    current_ = result_.model.entry();
    if (target == current_) return true;

    std::vector<std::pair<StateFingerprint, UiEvent>> path;
    try {
      path = result_.model.shortest_event_path(target);
    } catch (const Unreachable&) {
      mark_stuck(target);
      return true;
    }
    for (size_t i = 0; i < path.size(); ++i) {
      if (between_events()) return false;
      const StateFingerprint expected_next =
          i + 1 < path.size() ? path[i + 1].first : target;
      current_ = observe(path[i].first, path[i].second);
      if (current_ != expected_next) {
        // diverged; count against the target so a flaky route cannot livelock
        if (++walk_failures_[target.digest] > 8) mark_stuck(target);
        return true;
      }
    }
    return true;
  }

  void mark_stuck(const StateFingerprint& fp) {
    stuck_.insert(fp.digest);
    std::cerr << "[explore] giving up on unreachable page " << to_hex(fp) << "\n";
  }

  DeviceAdapter& adapter_;
  const ExploreConfig& config_;
  ExploreControl* control_;
  ExploreResult result_;
  StateFingerprint current_;
  std::set<std::uint64_t> script_targets_;
  std::set<std::uint64_t> stuck_;
  std::map<std::uint64_t, int> walk_failures_;
  clock::time_point start_;
  bool screenshot_cap_ = false;
};

}  // namespace detail

// Explores the app until the wall-clock budget elapses, every in-depth event
// has been tried, or a stop is requested. LaunchFailed propagates; a dump
// failure that survives retries returns a partial result flagged aborted.
inline ExploreResult explore(DeviceAdapter& adapter, const ExploreConfig& config,
                             ExploreControl* control = nullptr) {
  return detail::ExploreRun(adapter, config, control).run();
}

}  // namespace droidmeter
