#include "droidmeter/shell_device.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace droidmeter;

namespace {

// Records every argv and answers from a canned table; `adb pull` writes the
// canned payload to the requested local path.
class FakeRunner : public CommandRunner {
 public:
  std::vector<std::vector<std::string>> calls;
  std::string pull_payload;
  int exit_code = 0;
  std::string output;
  std::vector<std::string> stream_lines;

  Result run(const std::vector<std::string>& argv) override {
    calls.push_back(argv);
    if (argv.size() >= 2 && argv[1] == "pull") {
      std::ofstream out(argv[3], std::ios::binary);
      out << pull_payload;
    }
    return {exit_code, output};
  }

  void stream(const std::vector<std::string>& argv,
              const std::function<void(const std::string&)>& on_line,
              const std::atomic<bool>& stop) override {
    calls.push_back(argv);
    for (const std::string& line : stream_lines) {
      if (stop.load()) break;
      on_line(line);
    }
  }
};

TEST(ShellDevice, LaunchCommandIsExact) {
  auto runner = std::make_shared<FakeRunner>();
  ShellDevice device("SER123", runner);
  device.launch_app("com.demo.sports/.MainActivity");
  ASSERT_EQ(runner->calls.size(), 1u);
  EXPECT_EQ(runner->calls[0],
            (std::vector<std::string>{"adb", "-s", "SER123", "shell", "am", "start", "-W", "-n",
                                      "com.demo.sports/.MainActivity"}));
}

TEST(ShellDevice, LaunchErrorDetected) {
  auto runner = std::make_shared<FakeRunner>();
  runner->output = "Error: Activity class does not exist";
  ShellDevice device("SER123", runner);
  EXPECT_THROW(device.launch_app("com.nope/.Main"), LaunchFailed);
}

TEST(ShellDevice, DumpCommandsAndPulledContent) {
  auto runner = std::make_shared<FakeRunner>();
  runner->pull_payload =
      "<node class='android.widget.FrameLayout' bounds='[0,0][10,10]'/>";
  ShellDevice device("SER123", runner);
  const std::string dump = device.dump_ui();
  ASSERT_EQ(runner->calls.size(), 2u);
  EXPECT_EQ(runner->calls[0],
            (std::vector<std::string>{"adb", "shell", "uiautomator", "dump", "/sdcard/ui.xml"}));
  EXPECT_EQ(runner->calls[1][0], "adb");
  EXPECT_EQ(runner->calls[1][1], "pull");
  EXPECT_EQ(runner->calls[1][2], "/sdcard/ui.xml");
  EXPECT_EQ(dump, runner->pull_payload);
}

TEST(ShellDevice, InputCommandsAreExact) {
  auto runner = std::make_shared<FakeRunner>();
  ShellDevice device("SER123", runner);

  ElementPath path;
  path.steps.push_back({0, "android.widget.Button"});
  device.inject(UiEvent::tap(path, {540, 960}));
  EXPECT_EQ(runner->calls.back(),
            (std::vector<std::string>{"adb", "shell", "input", "tap", "540", "960"}));

  device.inject(UiEvent::back());
  EXPECT_EQ(runner->calls.back(),
            (std::vector<std::string>{"adb", "shell", "input", "keyevent", "KEYCODE_BACK"}));
}

TEST(ShellDevice, ForwardCommandIsExact) {
  auto runner = std::make_shared<FakeRunner>();
  ShellDevice device("SER123", runner);
  DebugEndpoint endpoint =
      device.forward_debug_port("localabstract:webview_devtools_remote_4242", 9222);
  EXPECT_EQ(endpoint.port, 9222);
  EXPECT_EQ(runner->calls.back(),
            (std::vector<std::string>{"adb", "forward", "tcp:9222",
                                      "localabstract:webview_devtools_remote_4242"}));
}

TEST(ShellDevice, ScreenRecordCommand) {
  auto runner = std::make_shared<FakeRunner>();
  ShellDevice device("SER123", runner);
  device.record_screen(10000, "/sdcard/dm_video.mp4");
  EXPECT_EQ(runner->calls.back(),
            (std::vector<std::string>{"adb", "shell", "screenrecord", "--time-limit", "10",
                                      "/sdcard/dm_video.mp4"}));
}

TEST(ShellDevice, FrameCaptureIsUnsupported) {
  auto runner = std::make_shared<FakeRunner>();
  ShellDevice device("SER123", runner);
  EXPECT_FALSE(device.capabilities().count(Capability::FrameCapture));
  EXPECT_THROW(device.capture_frames(1000), Unsupported);
}

TEST(ShellDevice, LogcatStreamParsesEpochLines) {
  auto runner = std::make_shared<FakeRunner>();
  runner->stream_lines = {
      "       1710000000.123  1234  1234 I DroidTiming: DM_ONCREATE_BEGIN com.app.Main",
      "       1710000000.456  1234  1234 I DroidTiming: DM_ONCREATE_END com.app.Main",
      "--------- beginning of system",  // no epoch prefix: ignored
  };
  ShellDevice device("SER123", runner);
  auto log = device.log_stream();
  // the stream thread runs through the canned lines immediately; wait for close
  for (int i = 0; i < 100 && !log->closed(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  auto lines = log->drain();
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].t_ms, 1710000000123);
  EXPECT_EQ(lines[0].line, "DM_ONCREATE_BEGIN com.app.Main");
  ASSERT_EQ(runner->calls.size(), 1u);
  EXPECT_EQ(runner->calls[0], (std::vector<std::string>{"adb", "logcat", "-v", "epoch"}));
}

}  // namespace
