#pragma once

// Visual and native load metrics. SpeedIndex is the time integral of visual
// incompleteness over a frame capture; completeness is per-frame histogram
// L1 distance to the final frame. Activity timing is parsed from injected
// marker lines on the device log stream.

#include <array>
#include <cstdint>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "droidmeter/errors.hpp"

namespace droidmeter {

struct FrameSample {
  std::int64_t t_ms = 0;
  // 3 x 256 per-channel bins. Grayscale sources replicate the channel.
  std::array<std::array<std::int64_t, 256>, 3> histogram{};

  std::array<std::int64_t, 3> channel_sums() const {
    std::array<std::int64_t, 3> sums{};
    for (int c = 0; c < 3; ++c)
      for (std::int64_t bin : histogram[static_cast<size_t>(c)]) sums[static_cast<size_t>(c)] += bin;
    return sums;
  }
};

// Per-channel histograms from packed RGB bytes.
inline FrameSample frame_from_rgb(std::int64_t t_ms, std::span<const std::uint8_t> rgb) {
  FrameSample frame;
  frame.t_ms = t_ms;
  for (size_t i = 0; i + 2 < rgb.size(); i += 3) {
    ++frame.histogram[0][rgb[i]];
    ++frame.histogram[1][rgb[i + 1]];
    ++frame.histogram[2][rgb[i + 2]];
  }
  return frame;
}

namespace detail {

inline std::int64_t histogram_l1(const FrameSample& a, const FrameSample& b) {
  std::int64_t d = 0;
  for (size_t c = 0; c < 3; ++c)
    for (size_t bin = 0; bin < 256; ++bin) {
      std::int64_t diff = a.histogram[c][bin] - b.histogram[c][bin];
      d += diff < 0 ? -diff : diff;
    }
  return d;
}

inline void check_resolution(const FrameSample& a, const FrameSample& b) {
  if (a.channel_sums() != b.channel_sums())
    throw ResolutionMismatch("frame histograms disagree on pixel count");
}

}  // namespace detail

// completeness = 1 - D(frame, final) / D(first, final), clamped to [0,1].
// A capture whose first and final frames already match is complete throughout.
inline double visual_completeness(const FrameSample& frame, const FrameSample& first,
                                  const FrameSample& final_frame) {
  detail::check_resolution(frame, final_frame);
  detail::check_resolution(first, final_frame);
  const std::int64_t denom = detail::histogram_l1(first, final_frame);
  if (denom == 0) return 1.0;
  const double vc = 1.0 - static_cast<double>(detail::histogram_l1(frame, final_frame)) /
                              static_cast<double>(denom);
  return vc < 0.0 ? 0.0 : (vc > 1.0 ? 1.0 : vc);
}

// Left Riemann sum of (1 - VC) over the capture; the last frame contributes
// no interval. Result in milliseconds.
inline double speed_index(std::span<const FrameSample> frames) {
  if (frames.empty()) throw Error("speed_index: no frames");
  for (size_t i = 1; i < frames.size(); ++i)
    if (frames[i].t_ms <= frames[i - 1].t_ms)
      throw NonMonotonicTimestamps("frame timestamps must strictly increase");
  if (frames.size() == 1) return 0.0;
  const FrameSample& first = frames.front();
  const FrameSample& last = frames.back();
  double si = 0.0;
  for (size_t i = 0; i + 1 < frames.size(); ++i) {
    const double vc = visual_completeness(frames[i], first, last);
    si += (1.0 - vc) * static_cast<double>(frames[i + 1].t_ms - frames[i].t_ms);
  }
  return si;
}

// --- native activity timing --------------------------------------------------

struct LogLine {
  std::int64_t t_ms = 0;
  std::string line;
};

struct ActivityTiming {
  std::string activity_name;
  std::int64_t create_begin = 0;
  std::int64_t create_end = 0;
  std::optional<std::int64_t> fully_drawn;

  std::int64_t oncreate_ms() const { return create_end - create_begin; }
  std::optional<std::int64_t> fully_drawn_ms() const {
    if (!fully_drawn) return std::nullopt;
    return *fully_drawn - create_begin;
  }
};

// Marker line grammar (exact):
//   DM_ONCREATE_BEGIN <activity>
//   DM_ONCREATE_END <activity>
//   DM_FULLY_DRAWN <activity>
// BEGIN/END pair per activity occurrence in order; a BEGIN without a matching
// END is dropped with a warning. Only the first FULLY_DRAWN per completed
// instance counts; later ones for the same instance are ignored.
inline std::vector<ActivityTiming> parse_activity_timing(std::span<const LogLine> lines) {
  constexpr std::string_view kBegin = "DM_ONCREATE_BEGIN ";
  constexpr std::string_view kEnd = "DM_ONCREATE_END ";
  constexpr std::string_view kDrawn = "DM_FULLY_DRAWN ";

  std::vector<ActivityTiming> done;
  struct Open {
    std::string activity;
    std::int64_t begin;
  };
  std::vector<Open> open;

  auto take = [](std::string_view line, std::string_view prefix) -> std::optional<std::string> {
    if (line.substr(0, prefix.size()) != prefix) return std::nullopt;
    std::string name(line.substr(prefix.size()));
    if (name.empty()) return std::nullopt;
    return name;
  };

  for (const LogLine& entry : lines) {
    if (auto name = take(entry.line, kBegin)) {
      for (auto it = open.begin(); it != open.end();) {
        if (it->activity == *name) {
          std::cerr << "[warn] dropping unmatched DM_ONCREATE_BEGIN for " << *name << "\n";
          it = open.erase(it);
        } else {
          ++it;
        }
      }
      open.push_back({*name, entry.t_ms});
    } else if (auto name = take(entry.line, kEnd)) {
      bool matched = false;
      for (auto it = open.rbegin(); it != open.rend(); ++it) {
        if (it->activity == *name) {
          if (entry.t_ms >= it->begin)
            done.push_back({*name, it->begin, entry.t_ms, std::nullopt});
          open.erase(std::next(it).base());
          matched = true;
          break;
        }
      }
      if (!matched)
        std::cerr << "[warn] DM_ONCREATE_END without BEGIN for " << *name << "\n";
    } else if (auto name = take(entry.line, kDrawn)) {
      for (auto it = done.rbegin(); it != done.rend(); ++it) {
        if (it->activity_name == *name) {
          if (!it->fully_drawn && entry.t_ms >= it->create_end) it->fully_drawn = entry.t_ms;
          break;
        }
      }
    }
    // anything else on the stream is not a marker line; ignore
  }
  if (!open.empty())
    std::cerr << "[warn] dropping " << open.size() << " unmatched DM_ONCREATE_BEGIN marker(s)\n";
  return done;
}

}  // namespace droidmeter
