#pragma once

// Script replay with state verification. Before every event the live page is
// fingerprinted against the script's expectation; on divergence the replayer
// rewinds (Back first, relaunch-and-rewalk if Back does not restore the
// expected page) and retries the step, up to retry_limit times per step.
// Every failure path is encoded in the outcome, never thrown.

#include <chrono>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "droidmeter/device.hpp"
#include "droidmeter/errors.hpp"
#include "droidmeter/explorer.hpp"

namespace droidmeter {

struct MeasurementHooks {
  std::function<void()> before;  // fired just before the final step
  std::function<void()> after;   // fired after the final step completed (or replay gave up)
};

struct ReplayOutcome {
  enum class Status { Reached, Unreachable, DeviceError };

  Status status = Status::DeviceError;
  int steps_executed = 0;
  int retries_used = 0;
  std::vector<std::pair<int, StateFingerprint>> divergences;  // (step index, observed)
  std::int64_t duration_ms = 0;
};

inline const char* status_name(ReplayOutcome::Status status) {
  switch (status) {
    case ReplayOutcome::Status::Reached: return "reached";
    case ReplayOutcome::Status::Unreachable: return "unreachable";
    case ReplayOutcome::Status::DeviceError: return "device_error";
  }
  return "?";
}

inline nlohmann::json to_json(const ReplayOutcome& outcome) {
  nlohmann::json j;
  j["status"] = status_name(outcome.status);
  j["steps_executed"] = outcome.steps_executed;
  j["retries_used"] = outcome.retries_used;
  nlohmann::json divergences = nlohmann::json::array();
  for (const auto& [step, fp] : outcome.divergences)
    divergences.push_back(nlohmann::json::array({step, to_hex(fp)}));
  j["divergences"] = std::move(divergences);
  j["duration_ms"] = outcome.duration_ms;
  return j;
}

inline ReplayOutcome replay(DeviceAdapter& adapter, const ReplayScript& script, int retry_limit,
                            const MeasurementHooks& hooks = {}, int dump_retry = 3) {
  const auto wall_start = std::chrono::steady_clock::now();
  ReplayOutcome outcome;
  auto finish = [&](ReplayOutcome::Status status) {
    outcome.status = status;
    outcome.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - wall_start)
                              .count();
    return outcome;
  };

  const size_t n = script.steps.size();
  // expectation checkpoints: steps[i].expected for i < n, then the target
  auto expected_at = [&](size_t i) -> const StateFingerprint& {
    return i < n ? script.steps[i].expected : script.target;
  };
  std::set<std::uint64_t> script_pages;
  for (const ScriptStep& step : script.steps) script_pages.insert(step.expected.digest);
  script_pages.insert(script.target.digest);

  // retry budget is per script step (a divergence at checkpoint i means the
  // transition into it, i.e. step i-1, is being retried); a zero-step script
  // therefore never retries, keeping retries_used <= retry_limit * |steps|
  std::vector<int> retries(n == 0 ? 1 : n, 0);
  std::vector<bool> dialog_dismissed(n + 1, false);
  auto retried_step = [&](size_t checkpoint) { return checkpoint == 0 ? 0 : checkpoint - 1; };
  bool before_fired = false;
  bool after_fired = false;
  auto fire_before = [&] {
    if (!before_fired && hooks.before) hooks.before();
    before_fired = true;
  };
  auto fire_after = [&] {
    if (before_fired && !after_fired && hooks.after) hooks.after();
    after_fired = true;
  };

  try {
    adapter.launch_app(script.app_id);
    if (n == 0) fire_before();

    size_t i = 0;  // next checkpoint to verify
    for (;;) {
      UiNode tree = parse_ui_dump(dump_ui_with_retry(adapter, dump_retry + 1));
      const StateFingerprint fp = fingerprint(tree);

      bool verified = fp == expected_at(i);
      UiEvent event;
      if (verified && i < n) {
        event = script.steps[i].event;
        if (event.kind == EventKind::Tap) {
          // re-resolve against the live tree so layout shifts do not stale
          // the recorded pixel point
          try {
            const UiNode& node = resolve_path(tree, *event.target);
            event.tap_point = {node.bounds.center_x(), node.bounds.center_y()};
          } catch (const PathMismatch&) {
            verified = false;
          }
        }
      }

      if (verified) {
        if (i == n) {
          fire_after();
          outcome.steps_executed = static_cast<int>(n);
          return finish(ReplayOutcome::Status::Reached);
        }
        if (i + 1 == n) fire_before();
        adapter.inject(event);
        outcome.steps_executed =
            std::max(outcome.steps_executed, static_cast<int>(i) + 1);
        ++i;
        continue;
      }

      // divergence at checkpoint i
      outcome.divergences.push_back({static_cast<int>(i), fp});

      // an unknown page is usually a transient dialog: one free Back first
      if (!script_pages.count(fp.digest) && !dialog_dismissed[i]) {
        dialog_dismissed[i] = true;
        adapter.inject(UiEvent::back());
        continue;
      }

      if (n == 0 || retries[retried_step(i)] >= retry_limit) {
        fire_after();
        return finish(ReplayOutcome::Status::Unreachable);
      }
      ++retries[retried_step(i)];
      ++outcome.retries_used;

      // rewind: Back once; if that does not land on the previous checkpoint,
      // relaunch and walk the known-good prefix again
      adapter.inject(UiEvent::back());
      const StateFingerprint after_back =
          fingerprint(parse_ui_dump(dump_ui_with_retry(adapter, dump_retry + 1)));
      if (i > 0 && after_back == expected_at(i - 1)) {
        i = i - 1;
        continue;
      }
      adapter.launch_app(script.app_id);
      i = 0;
    }
  } catch (const Error&) {
    fire_after();
    return finish(ReplayOutcome::Status::DeviceError);
  }
}

}  // namespace droidmeter
