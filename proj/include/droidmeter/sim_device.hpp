#pragma once

// Deterministic simulated device backed by a Scenario. All desk-scale tests
// run against this adapter: with a fixed seed, two runs produce identical
// dump/log/frame/trace sequences. Time is logical and advances by a fixed
// quantum per operation, so recorded timestamps are reproducible.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "droidmeter/cdp_server.hpp"
#include "droidmeter/device.hpp"
#include "droidmeter/scenario.hpp"

namespace droidmeter {

class SimDevice : public DeviceAdapter {
 public:
  explicit SimDevice(Scenario scenario, std::uint64_t seed = 0)
      : scenario_(std::move(scenario)), rng_(seed), log_(std::make_shared<LogStream>()) {}

  std::set<Capability> capabilities() const override {
    return {Capability::UiDump, Capability::Tap, Capability::Back, Capability::FrameCapture,
            Capability::LogStream, Capability::PortForward, Capability::Screenshot};
  }

  void launch_app(const std::string& app_id) override {
    if (app_id != scenario_.app_id)
      throw LaunchFailed("app '" + app_id + "' is not installed (scenario has '" +
                         scenario_.app_id + "')");
    tick(kLaunchQuantum);
    launched_ = true;
    dialog_resume_.reset();
    enter_state(scenario_.initial_state);
  }

  std::string dump_ui() override {
    require(Capability::UiDump);
    ensure_launched();
    tick(kDumpQuantum);
    return scenario_.state(current_).ui_dump;
  }

  void inject(const UiEvent& event) override {
    require(event.kind == EventKind::Tap ? Capability::Tap : Capability::Back);
    ensure_launched();
    tick(kInjectQuantum);

    if (event.kind == EventKind::Tap && event.tap_point) {
      const Rect screen = parse_ui_dump(scenario_.state(current_).ui_dump).bounds;
      if (!screen.contains(event.tap_point->first, event.tap_point->second))
        throw InjectFailed("tap point outside screen bounds");
    }

    // dismissing an interrupting dialog restores the interrupted page
    if (dialog_resume_ && scenario_.transient_dialog &&
        current_ == scenario_.transient_dialog->state) {
      if (event.kind == EventKind::Back ||
          same_event(event, scenario_.transient_dialog->dismiss)) {
        const std::string resume = *dialog_resume_;
        dialog_resume_.reset();
        enter_state(resume);
      }
      return;
    }

    if (scenario_.transient_dialog && scenario_.transient_dialog->probability > 0 &&
        draw() < scenario_.transient_dialog->probability) {
      dialog_resume_ = current_;
      enter_state(scenario_.transient_dialog->state);
      return;
    }

    if (scenario_.drop_probability > 0 && draw() < scenario_.drop_probability) return;

    auto it = scenario_.transitions.find({current_, event_key(event)});
    if (it != scenario_.transitions.end()) enter_state(it->second);
    // unmatched events are no-ops
  }

  std::vector<FrameSample> capture_frames(std::int64_t duration_ms) override {
    require(Capability::FrameCapture);
    ensure_launched();
    tick(kDumpQuantum);
    const ScenarioState& state = scenario_.state(current_);
    std::vector<FrameSample> frames;
    for (const FrameSample& frame : state.frames)
      if (frame.t_ms <= duration_ms) frames.push_back(frame);
    if (frames.empty()) {
      // no scripted frames: the page is visually complete immediately
      FrameSample frame;
      frame.t_ms = 0;
      for (int c = 0; c < 3; ++c) frame.histogram[static_cast<size_t>(c)][0] = 1;
      frames.push_back(frame);
    }
    return frames;
  }

  std::shared_ptr<LogStream> log_stream() override {
    require(Capability::LogStream);
    return log_;
  }

  DebugEndpoint forward_debug_port(const std::string& /*remote*/,
                                   std::uint16_t local_port) override {
    require(Capability::PortForward);
    try {
      cdp_ = std::make_unique<CdpDebugServer>(local_port, scenario_.app_id);
    } catch (const PortInUse&) {
      throw;
    } catch (const NetError& e) {
      throw ForwardFailed(e.what());
    }
    if (launched_) cdp_->page_entered(scenario_.state(current_).network_trace);
    return {"127.0.0.1", cdp_->port()};
  }

  std::vector<std::uint8_t> screenshot() override {
    require(Capability::Screenshot);
    ensure_launched();
    // fixed 1x1 PNG; enough to exercise the screenshot path deterministically
    static const std::uint8_t kPng[] = {
        0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
        0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
        0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
        0xda, 0x63, 0x60, 0x00, 0x00, 0x00, 0x02, 0x00, 0x01, 0xe5, 0x27, 0xde, 0xfc, 0x00,
        0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
    return std::vector<std::uint8_t>(kPng, kPng + sizeof(kPng));
  }

  std::string current_activity() override {
    ensure_launched();
    return scenario_.state(current_).activity_name;
  }

  std::int64_t now_ms() override { return clock_ms_; }

  const std::string& current_state_label() const { return current_; }

 private:
  static constexpr std::int64_t kLaunchQuantum = 1000;
  static constexpr std::int64_t kInjectQuantum = 100;
  static constexpr std::int64_t kDumpQuantum = 10;

  void ensure_launched() const {
    if (!launched_) throw DumpFailed("app not launched");
  }

  void tick(std::int64_t quantum) { clock_ms_ += quantum; }

  // Uniform double in [0,1) from the seeded engine; stable across platforms.
  double draw() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  void enter_state(const std::string& label) {
    current_ = label;
    const ScenarioState& state = scenario_.state(label);
    for (const auto& [offset, line] : state.on_enter_log) log_->push(clock_ms_ + offset, line);
    if (cdp_) cdp_->page_entered(state.network_trace);
  }

  Scenario scenario_;
  std::mt19937_64 rng_;
  std::shared_ptr<LogStream> log_;
  std::unique_ptr<CdpDebugServer> cdp_;

  bool launched_ = false;
  std::string current_;
  std::optional<std::string> dialog_resume_;
  std::int64_t clock_ms_ = 0;
};

}  // namespace droidmeter
