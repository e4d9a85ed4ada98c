#pragma once

// Uniform adapter over a device under test. One adapter serves one device;
// inject/dump calls are strictly sequential, while the log stream and the
// forwarded debug endpoint deliver data concurrently.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "droidmeter/collector.hpp"
#include "droidmeter/errors.hpp"
#include "droidmeter/metrics.hpp"
#include "droidmeter/ui_tree.hpp"

namespace droidmeter {

enum class Capability { UiDump, Tap, Back, FrameCapture, LogStream, PortForward, Screenshot };

inline const char* capability_name(Capability cap) {
  switch (cap) {
    case Capability::UiDump: return "UiDump";
    case Capability::Tap: return "Tap";
    case Capability::Back: return "Back";
    case Capability::FrameCapture: return "FrameCapture";
    case Capability::LogStream: return "LogStream";
    case Capability::PortForward: return "PortForward";
    case Capability::Screenshot: return "Screenshot";
  }
  return "?";
}

// Thread-safe sink of timing marker lines; producers push, one consumer drains.
class LogStream {
 public:
  void push(std::int64_t t_ms, std::string line) {
    std::lock_guard<std::mutex> lock(mutex_);
    lines_.push_back({t_ms, std::move(line)});
  }

  // Removes and returns everything received so far, in arrival order.
  std::vector<LogLine> drain() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<LogLine> out;
    out.swap(lines_);
    return out;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mutex_);
    closed_ = true;
  }
  bool closed() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return closed_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<LogLine> lines_;
  bool closed_ = false;
};

class DeviceAdapter {
 public:
  virtual ~DeviceAdapter() = default;

  virtual std::set<Capability> capabilities() const = 0;

  virtual void launch_app(const std::string& app_id) = 0;
  virtual std::string dump_ui() = 0;
  virtual void inject(const UiEvent& event) = 0;
  virtual std::vector<FrameSample> capture_frames(std::int64_t duration_ms) = 0;
  virtual std::shared_ptr<LogStream> log_stream() = 0;
  virtual DebugEndpoint forward_debug_port(const std::string& remote, std::uint16_t local_port) = 0;
  virtual std::vector<std::uint8_t> screenshot() = 0;

  // Activity currently in the foreground; recorded per discovered state.
  virtual std::string current_activity() = 0;

  // Device-run time in ms since this adapter started, used for every recorded
  // timestamp. The simulated backend advances it deterministically.
  virtual std::int64_t now_ms() = 0;

 protected:
  void require(Capability cap) const {
    if (!capabilities().count(cap))
      throw Unsupported(std::string("adapter does not support ") + capability_name(cap));
  }
};

// Dump with bounded retries; transient dump failures on real hardware are
// common enough that callers never see a single flake.
inline std::string dump_ui_with_retry(DeviceAdapter& adapter, int attempts,
                                      int delay_ms = 500) {
  if (attempts < 1) attempts = 1;
  for (int i = 0;; ++i) {
    try {
      return adapter.dump_ui();
    } catch (const DumpFailed&) {
      if (i + 1 >= attempts) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
  }
}

}  // namespace droidmeter
