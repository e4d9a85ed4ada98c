#pragma once

// Scenario files encode an app as an explicit page-state machine so that
// exploration, replay, and measurement are fully testable without hardware.
// See README for the file format.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "droidmeter/errors.hpp"
#include "droidmeter/metrics.hpp"
#include "droidmeter/network_event.hpp"
#include "droidmeter/ui_tree.hpp"

namespace droidmeter {

struct ScenarioState {
  std::string ui_dump;        // uiautomator-dialect XML, served verbatim
  std::string activity_name;
  std::vector<std::pair<std::int64_t, std::string>> on_enter_log;  // (offset ms, line)
  std::vector<NetworkEvent> network_trace;  // embedded page traffic, optional
  std::vector<FrameSample> frames;          // scripted capture, optional
};

struct TransientDialog {
  double probability = 0;
  std::string state;        // dialog page label
  UiEvent dismiss;          // event that returns to the interrupted page
};

struct Scenario {
  std::string app_id;
  std::string initial_state;
  std::map<std::string, ScenarioState> states;
  // (state label, event key) -> destination label; events not listed are no-ops
  std::map<std::pair<std::string, std::string>, std::string> transitions;
  double drop_probability = 0;
  std::optional<TransientDialog> transient_dialog;

  const ScenarioState& state(const std::string& label) const {
    auto it = states.find(label);
    if (it == states.end()) throw Error("scenario: unknown state '" + label + "'");
    return it->second;
  }
};

namespace detail {

inline FrameSample frame_from_json(const nlohmann::json& j) {
  FrameSample frame;
  frame.t_ms = j.at("t_ms").get<std::int64_t>();
  if (j.contains("gray")) {
    // sparse grayscale histogram {bin: count}, replicated across channels
    for (auto it = j["gray"].begin(); it != j["gray"].end(); ++it) {
      const int bin = std::stoi(it.key());
      if (bin < 0 || bin > 255) throw IoError("frame histogram bin out of range");
      const std::int64_t count = it.value().get<std::int64_t>();
      for (int c = 0; c < 3; ++c) frame.histogram[static_cast<size_t>(c)][static_cast<size_t>(bin)] = count;
    }
  } else if (j.contains("rgb")) {
    const auto& channels = j["rgb"];
    for (size_t c = 0; c < 3; ++c) {
      for (auto it = channels.at(c).begin(); it != channels.at(c).end(); ++it) {
        const int bin = std::stoi(it.key());
        if (bin < 0 || bin > 255) throw IoError("frame histogram bin out of range");
        frame.histogram[c][static_cast<size_t>(bin)] = it.value().get<std::int64_t>();
      }
    }
  } else {
    throw IoError("frame needs a 'gray' or 'rgb' histogram");
  }
  return frame;
}

inline nlohmann::json frame_to_json(const FrameSample& frame) {
  nlohmann::json j;
  j["t_ms"] = frame.t_ms;
  nlohmann::json channels = nlohmann::json::array();
  for (size_t c = 0; c < 3; ++c) {
    nlohmann::json sparse = nlohmann::json::object();
    for (size_t bin = 0; bin < 256; ++bin)
      if (frame.histogram[c][bin] != 0) sparse[std::to_string(bin)] = frame.histogram[c][bin];
    channels.push_back(std::move(sparse));
  }
  j["rgb"] = std::move(channels);
  return j;
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario sc;
  sc.app_id = j.at("app_id").get<std::string>();
  sc.initial_state = j.at("initial_state").get<std::string>();
  sc.drop_probability = j.value("flakiness", 0.0);
  if (sc.drop_probability < 0 || sc.drop_probability > 1)
    throw IoError("scenario: flakiness must be within [0,1]");

  for (auto it = j.at("states").begin(); it != j.at("states").end(); ++it) {
    ScenarioState state;
    const nlohmann::json& js = it.value();
    state.ui_dump = js.at("ui_dump").get<std::string>();
    state.activity_name = js.value("activity", std::string());
    if (js.contains("on_enter_log"))
      for (const auto& entry : js["on_enter_log"])
        state.on_enter_log.emplace_back(entry.at(0).get<std::int64_t>(),
                                        entry.at(1).get<std::string>());
    if (js.contains("network_trace"))
      for (const auto& ev : js["network_trace"])
        state.network_trace.push_back(network_event_from_json(ev));
    if (js.contains("frames")) {
      std::int64_t prev = -1;
      for (const auto& jf : js["frames"]) {
        FrameSample frame = detail::frame_from_json(jf);
        if (frame.t_ms <= prev) throw IoError("scenario: frame timestamps must strictly increase");
        prev = frame.t_ms;
        state.frames.push_back(std::move(frame));
      }
    }
    // the dump must parse; better to fail at load time than mid-exploration
    parse_ui_dump(state.ui_dump);
    sc.states[it.key()] = std::move(state);
  }

  if (!sc.states.count(sc.initial_state))
    throw IoError("scenario: initial_state '" + sc.initial_state + "' not defined");

  for (const auto& jt : j.at("transitions")) {
    const std::string from = jt.at("from").get<std::string>();
    const std::string to = jt.at("to").get<std::string>();
    if (!sc.states.count(from) || !sc.states.count(to))
      throw IoError("scenario: transition endpoint not defined (" + from + " -> " + to + ")");
    UiEvent on = event_from_json(jt.at("on"));
    sc.transitions[{from, event_key(on)}] = to;
  }

  if (j.contains("transient_dialog") && !j["transient_dialog"].is_null()) {
    TransientDialog dialog;
    const nlohmann::json& jd = j["transient_dialog"];
    dialog.probability = jd.at("probability").get<double>();
    if (dialog.probability < 0 || dialog.probability > 1)
      throw IoError("scenario: dialog probability must be within [0,1]");
    dialog.state = jd.at("state").get<std::string>();
    if (!sc.states.count(dialog.state))
      throw IoError("scenario: dialog state '" + dialog.state + "' not defined");
    dialog.dismiss = jd.contains("dismiss") ? event_from_json(jd["dismiss"]) : UiEvent::back();
    sc.transient_dialog = std::move(dialog);
  }

  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded()) throw IoError("scenario file " + path.string() + " is not valid JSON");
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("scenario file " + path.string() + ": " + e.what());
  }
}

}  // namespace droidmeter
