#pragma once

// Shell-command backend for real hardware, driving a device through adb.
// Commands go through a CommandRunner so tests can verify the exact argv
// without any device attached.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "droidmeter/device.hpp"
#include "droidmeter/errors.hpp"
#include "droidmeter/net/socket.hpp"

namespace droidmeter {

class CommandRunner {
 public:
  struct Result {
    int exit_code = 0;
    std::string output;
  };

  virtual ~CommandRunner() = default;
  virtual Result run(const std::vector<std::string>& argv) = 0;

  // Long-running command whose stdout is delivered line by line until the
  // stop flag is set or the process ends.
  virtual void stream(const std::vector<std::string>& argv,
                      const std::function<void(const std::string&)>& on_line,
                      const std::atomic<bool>& stop) = 0;
};

class SystemCommandRunner : public CommandRunner {
 public:
  Result run(const std::vector<std::string>& argv) override {
    FILE* pipe = popen(join(argv).c_str(), "r");
    if (!pipe) return {127, ""};
    std::string output;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) output.append(buf, n);
    int status = pclose(pipe);
    return {status == -1 ? 127 : WEXITSTATUS(status), std::move(output)};
  }

  void stream(const std::vector<std::string>& argv,
              const std::function<void(const std::string&)>& on_line,
              const std::atomic<bool>& stop) override {
    FILE* pipe = popen(join(argv).c_str(), "r");
    if (!pipe) return;
    std::string line;
    int c;
    while (!stop.load() && (c = fgetc(pipe)) != EOF) {
      if (c == '\n') {
        on_line(line);
        line.clear();
      } else {
        line += static_cast<char>(c);
      }
    }
    pclose(pipe);
  }

 private:
  static std::string join(const std::vector<std::string>& argv) {
    std::string cmd;
    for (const std::string& arg : argv) {
      if (!cmd.empty()) cmd += ' ';
      cmd += shell_quote(arg);
    }
    return cmd;
  }

  static std::string shell_quote(const std::string& arg) {
    if (!arg.empty() && arg.find_first_of(" \t\"'\\$&|;<>()*?#~") == std::string::npos)
      return arg;
    std::string quoted = "'";
    for (char c : arg) {
      if (c == '\'') quoted += "'\\''";
      else quoted += c;
    }
    quoted += '\'';
    return quoted;
  }
};

class ShellDevice : public DeviceAdapter {
 public:
  ShellDevice(std::string serial, std::shared_ptr<CommandRunner> runner)
      : serial_(std::move(serial)),
        runner_(std::move(runner)),
        start_(std::chrono::steady_clock::now()),
        log_(std::make_shared<LogStream>()) {}

  ~ShellDevice() override {
    logcat_stop_.store(true);
    if (logcat_thread_.joinable()) logcat_thread_.join();
  }

  std::set<Capability> capabilities() const override {
    // FrameCapture is absent: screenrecord produces an mp4 whose frame
    // extraction is delegated to an external decode step.
    return {Capability::UiDump, Capability::Tap, Capability::Back, Capability::LogStream,
            Capability::PortForward, Capability::Screenshot};
  }

  void launch_app(const std::string& component) override {
    auto result = runner_->run({"adb", "-s", serial_, "shell", "am", "start", "-W", "-n", component});
    if (result.exit_code != 0 || result.output.find("Error") != std::string::npos)
      throw LaunchFailed("am start failed for " + component + ": " + result.output);
  }

  std::string dump_ui() override {
    auto dump = runner_->run({"adb", "shell", "uiautomator", "dump", "/sdcard/ui.xml"});
    if (dump.exit_code != 0 || dump.output.find("ERROR") != std::string::npos)
      throw DumpFailed("uiautomator dump failed: " + dump.output);
    const std::string local = local_tmp("ui.xml");
    auto pull = runner_->run({"adb", "pull", "/sdcard/ui.xml", local});
    if (pull.exit_code != 0) throw DumpFailed("adb pull failed: " + pull.output);
    std::ifstream in(local);
    if (!in) throw DumpFailed("pulled dump missing at " + local);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  void inject(const UiEvent& event) override {
    CommandRunner::Result result;
    if (event.kind == EventKind::Tap) {
      if (!event.tap_point) throw InjectFailed("tap event without a tap point");
      result = runner_->run({"adb", "shell", "input", "tap",
                             std::to_string(event.tap_point->first),
                             std::to_string(event.tap_point->second)});
    } else {
      result = runner_->run({"adb", "shell", "input", "keyevent", "KEYCODE_BACK"});
    }
    if (result.exit_code != 0) throw InjectFailed("input injection failed: " + result.output);
  }

  std::vector<FrameSample> capture_frames(std::int64_t) override {
    require(Capability::FrameCapture);  // always raises Unsupported
    return {};
  }

  // Records the screen to an on-device mp4; decoding frames out of it is an
  // external step.
  void record_screen(std::int64_t duration_ms, const std::string& remote_path) {
    const auto seconds = std::max<std::int64_t>(1, duration_ms / 1000);
    auto result = runner_->run({"adb", "shell", "screenrecord", "--time-limit",
                                std::to_string(seconds), remote_path});
    if (result.exit_code != 0) throw CaptureFailed("screenrecord failed: " + result.output);
  }

  std::shared_ptr<LogStream> log_stream() override {
    if (!logcat_thread_.joinable()) {
      logcat_thread_ = std::thread([this] {
        runner_->stream({"adb", "logcat", "-v", "epoch"},
                        [this](const std::string& line) { push_logcat_line(line); },
                        logcat_stop_);
        log_->close();
      });
    }
    return log_;
  }

  DebugEndpoint forward_debug_port(const std::string& remote,
                                   std::uint16_t local_port) override {
    if (local_port == 0) local_port = net::pick_free_port();
    auto result =
        runner_->run({"adb", "forward", "tcp:" + std::to_string(local_port), remote});
    if (result.exit_code != 0) throw ForwardFailed("adb forward failed: " + result.output);
    return {"127.0.0.1", local_port};
  }

  std::vector<std::uint8_t> screenshot() override {
    auto cap = runner_->run({"adb", "shell", "screencap", "-p", "/sdcard/dm_screen.png"});
    if (cap.exit_code != 0) throw CaptureFailed("screencap failed: " + cap.output);
    const std::string local = local_tmp("screen.png");
    auto pull = runner_->run({"adb", "pull", "/sdcard/dm_screen.png", local});
    if (pull.exit_code != 0) throw CaptureFailed("adb pull failed: " + pull.output);
    std::ifstream in(local, std::ios::binary);
    if (!in) throw CaptureFailed("pulled screenshot missing at " + local);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
  }

  std::string current_activity() override {
    auto result = runner_->run({"adb", "shell", "dumpsys", "activity", "activities"});
    // first "mResumedActivity" record names the foreground activity
    auto pos = result.output.find("mResumedActivity");
    if (pos == std::string::npos) return "";
    auto end = result.output.find('\n', pos);
    std::string line = result.output.substr(pos, end - pos);
    std::istringstream words(line);
    std::string word, component;
    while (words >> word)
      if (word.find('/') != std::string::npos) component = word;
    return component;
  }

  std::int64_t now_ms() override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::string local_tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("droidmeter_" + serial_ + "_" + name))
        .string();
  }

  // `logcat -v epoch` lines look like:
  //   "  1710000000.123  1234  1234 I DroidMeter: DM_ONCREATE_BEGIN com.app/.Main"
  void push_logcat_line(const std::string& line) {
    std::istringstream words(line);
    double epoch;
    if (!(words >> epoch)) return;
    auto colon = line.find(": ");
    if (colon == std::string::npos) return;
    log_->push(static_cast<std::int64_t>(epoch * 1000.0), line.substr(colon + 2));
  }

  std::string serial_;
  std::shared_ptr<CommandRunner> runner_;
  std::chrono::steady_clock::time_point start_;
  std::shared_ptr<LogStream> log_;
  std::thread logcat_thread_;
  std::atomic<bool> logcat_stop_{false};
};

}  // namespace droidmeter
