#include "droidmeter/metrics.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace droidmeter;

namespace {

// Grayscale frame: `dark` pixels in bin 0, `light` pixels in bin 255.
FrameSample gray_frame(std::int64_t t_ms, std::int64_t dark, std::int64_t light) {
  FrameSample frame;
  frame.t_ms = t_ms;
  for (size_t c = 0; c < 3; ++c) {
    frame.histogram[c][0] = dark;
    frame.histogram[c][255] = light;
  }
  return frame;
}

TEST(VisualCompleteness, FinalFrameIsComplete) {
  FrameSample first = gray_frame(0, 1000, 0);
  FrameSample last = gray_frame(1000, 0, 1000);
  EXPECT_DOUBLE_EQ(visual_completeness(last, first, last), 1.0);
}

TEST(VisualCompleteness, FirstFrameIsZeroWhenLoadChangesPixels) {
  FrameSample first = gray_frame(0, 1000, 0);
  FrameSample last = gray_frame(1000, 0, 1000);
  EXPECT_DOUBLE_EQ(visual_completeness(first, first, last), 0.0);
}

// Hand-computed: half-white frame against black->white ramp.
// D(frame, final) = 3 channels * (500 + 500) = 3000
// D(first, final) = 3 channels * (1000 + 1000) = 6000  =>  VC = 0.5
TEST(VisualCompleteness, HalfRampIsHalf) {
  FrameSample first = gray_frame(0, 1000, 0);
  FrameSample mid = gray_frame(500, 500, 500);
  FrameSample last = gray_frame(1000, 0, 1000);
  EXPECT_DOUBLE_EQ(visual_completeness(mid, first, last), 0.5);
}

TEST(VisualCompleteness, StaticCaptureIsCompleteThroughout) {
  FrameSample only = gray_frame(0, 500, 500);
  FrameSample other = gray_frame(10, 500, 500);
  EXPECT_DOUBLE_EQ(visual_completeness(other, only, only), 1.0);
}

TEST(VisualCompleteness, ResolutionMismatchRejected) {
  FrameSample small = gray_frame(0, 10, 0);
  FrameSample big = gray_frame(1, 1000, 0);
  EXPECT_THROW(visual_completeness(small, big, big), ResolutionMismatch);
}

TEST(SpeedIndex, TwoFrameRamp) {
  std::vector<FrameSample> frames{gray_frame(0, 1000, 0), gray_frame(1000, 0, 1000)};
  EXPECT_DOUBLE_EQ(speed_index(frames), 1000.0);
}

TEST(SpeedIndex, ThreeFrameRampIs750) {
  std::vector<FrameSample> frames{gray_frame(0, 1000, 0), gray_frame(500, 500, 500),
                                  gray_frame(1000, 0, 1000)};
  EXPECT_DOUBLE_EQ(speed_index(frames), 750.0);
}

TEST(SpeedIndex, CompleteFromStartIsZero) {
  std::vector<FrameSample> frames{gray_frame(0, 0, 1000), gray_frame(400, 0, 1000),
                                  gray_frame(900, 0, 1000)};
  EXPECT_DOUBLE_EQ(speed_index(frames), 0.0);
}

TEST(SpeedIndex, SingleFrameIsZero) {
  std::vector<FrameSample> frames{gray_frame(0, 1, 0)};
  EXPECT_DOUBLE_EQ(speed_index(frames), 0.0);
}

TEST(SpeedIndex, NonMonotonicRejected) {
  std::vector<FrameSample> frames{gray_frame(100, 1, 0), gray_frame(100, 0, 1)};
  EXPECT_THROW(speed_index(frames), NonMonotonicTimestamps);
  std::vector<FrameSample> reversed{gray_frame(100, 1, 0), gray_frame(50, 0, 1)};
  EXPECT_THROW(speed_index(reversed), NonMonotonicTimestamps);
}

TEST(SpeedIndex, TranslationInvariance) {
  std::vector<FrameSample> frames{gray_frame(0, 1000, 0), gray_frame(300, 400, 600),
                                  gray_frame(800, 100, 900), gray_frame(1200, 0, 1000)};
  const double base = speed_index(frames);
  for (FrameSample& frame : frames) frame.t_ms += 5000;
  EXPECT_DOUBLE_EQ(speed_index(frames), base);
}

TEST(SpeedIndex, MonotoneInCompleteness) {
  std::vector<FrameSample> frames{gray_frame(0, 1000, 0), gray_frame(300, 700, 300),
                                  gray_frame(800, 200, 800), gray_frame(1200, 0, 1000)};
  const double base = speed_index(frames);
  frames[1] = gray_frame(300, 500, 500);  // raise VC of one intermediate frame
  EXPECT_LE(speed_index(frames), base);
}

// Randomized step functions against an independent summation oracle: the
// oracle works from the constructed completeness fractions, never from the
// histogram distance code under test.
TEST(SpeedIndex, MatchesSummationOracle) {
  std::mt19937_64 rng(4242);
  constexpr std::int64_t kPixels = 1000;
  for (int round = 0; round < 50; ++round) {
    const int frame_count = 2 + static_cast<int>(rng() % 49);
    std::vector<FrameSample> frames;
    std::vector<double> vc;
    std::int64_t t = 0;
    for (int i = 0; i < frame_count; ++i) {
      t += 1 + static_cast<std::int64_t>(rng() % 400);
      std::int64_t lit;
      if (i == 0) lit = 0;
      else if (i == frame_count - 1) lit = kPixels;
      else lit = static_cast<std::int64_t>(rng() % (kPixels + 1));
      frames.push_back(gray_frame(t, kPixels - lit, lit));
      vc.push_back(static_cast<double>(lit) / static_cast<double>(kPixels));
    }
    double oracle = 0;
    for (int i = 0; i + 1 < frame_count; ++i)
      oracle += (1.0 - vc[static_cast<size_t>(i)]) *
                static_cast<double>(frames[static_cast<size_t>(i) + 1].t_ms -
                                    frames[static_cast<size_t>(i)].t_ms);
    const double si = speed_index(frames);
    EXPECT_NEAR(si, oracle, 1.0) << "round " << round;
    EXPECT_GE(si, 0.0);
    EXPECT_LE(si, static_cast<double>(frames.back().t_ms - frames.front().t_ms) + 1e-9);
  }
}

TEST(ActivityTiming, MarkerTriple) {
  std::vector<LogLine> lines{
      {100, "DM_ONCREATE_BEGIN com.app.Main"},
      {250, "DM_ONCREATE_END com.app.Main"},
      {900, "DM_FULLY_DRAWN com.app.Main"},
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 1u);
  EXPECT_EQ(timings[0].activity_name, "com.app.Main");
  EXPECT_EQ(timings[0].create_begin, 100);
  EXPECT_EQ(timings[0].create_end, 250);
  EXPECT_EQ(timings[0].fully_drawn, 900);
  EXPECT_EQ(timings[0].oncreate_ms(), 150);
  EXPECT_EQ(timings[0].fully_drawn_ms(), 800);
}

TEST(ActivityTiming, OnlyFirstFullyDrawnCounts) {
  std::vector<LogLine> lines{
      {100, "DM_ONCREATE_BEGIN com.app.Main"},
      {250, "DM_ONCREATE_END com.app.Main"},
      {900, "DM_FULLY_DRAWN com.app.Main"},
      {950, "DM_FULLY_DRAWN com.app.Main"},
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 1u);
  EXPECT_EQ(timings[0].fully_drawn, 900);
}

TEST(ActivityTiming, UnmatchedBeginDropped) {
  std::vector<LogLine> lines{
      {100, "DM_ONCREATE_BEGIN com.app.Main"},
      {110, "DM_ONCREATE_BEGIN com.app.Other"},
      {140, "DM_ONCREATE_END com.app.Other"},
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 1u);
  EXPECT_EQ(timings[0].activity_name, "com.app.Other");
}

TEST(ActivityTiming, RepeatInstancesPairInOrder) {
  std::vector<LogLine> lines{
      {100, "DM_ONCREATE_BEGIN com.app.Main"},
      {150, "DM_ONCREATE_END com.app.Main"},
      {200, "DM_FULLY_DRAWN com.app.Main"},
      {500, "DM_ONCREATE_BEGIN com.app.Main"},
      {580, "DM_ONCREATE_END com.app.Main"},
      {700, "DM_FULLY_DRAWN com.app.Main"},
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 2u);
  EXPECT_EQ(timings[0].fully_drawn, 200);
  EXPECT_EQ(timings[1].create_begin, 500);
  EXPECT_EQ(timings[1].fully_drawn, 700);
}

TEST(ActivityTiming, NoiseIgnored) {
  std::vector<LogLine> lines{
      {50, "I/ActivityManager: START u0"},
      {90, "DM_ONCREATE_END com.app.Phantom"},  // END without BEGIN
      {100, "DM_ONCREATE_BEGIN com.app.Main"},
      {130, "garbage line"},
      {250, "DM_ONCREATE_END com.app.Main"},
      {260, "DM_FULLY_DRAWN com.app.Unknown"},  // no instance to attach to
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 1u);
  EXPECT_EQ(timings[0].activity_name, "com.app.Main");
  EXPECT_FALSE(timings[0].fully_drawn.has_value());
}

}  // namespace
