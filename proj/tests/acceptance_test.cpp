// Acceptance suite: one test per release criterion, each printing its own
// pass/fail line through the test runner. Everything runs against the
// simulated device at desk scale.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "droidmeter/app.hpp"
#include "droidmeter/config.hpp"
#include "droidmeter/explorer.hpp"
#include "droidmeter/har.hpp"
#include "droidmeter/metrics.hpp"
#include "droidmeter/replayer.hpp"
#include "droidmeter/sim_device.hpp"
#include "support/har_check.hpp"
#include "support/scenario_gen.hpp"
#include "support/temp_dir.hpp"

using namespace droidmeter;
using namespace droidmeter::testing;
using clock_ = std::chrono::steady_clock;

namespace {

const std::string kDemoScenario = std::string(DM_SCENARIO_DIR) + "/demo_app.json";

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ExploreConfig fast_explore(const std::string& app_id) {
  ExploreConfig config;
  config.app_id = app_id;
  config.max_explore_ms = 60000;
  config.max_depth = 12;
  return config;
}

StateFingerprint fp_of(const Scenario& sc, const std::string& label) {
  return fingerprint(parse_ui_dump(sc.state(label).ui_dump));
}

// Criterion 1: the six-page demo graph explored with a generous budget yields
// exactly 6 states, scripts for exactly the two embedded-web pages, and the
// first script is the two-step path through the match list. Under 5 seconds.
TEST(Acceptance, C1_WorkedExampleReproduction) {
  const auto start = clock_::now();
  Scenario sc = load_scenario(kDemoScenario);
  SimDevice device(sc);
  ExploreResult result = explore(device, fast_explore("com.demo.sports"));

  EXPECT_EQ(result.model.states().size(), 6u);

  std::set<std::uint64_t> targets;
  for (const ReplayScript& script : result.scripts) targets.insert(script.target.digest);
  EXPECT_EQ(targets, (std::set<std::uint64_t>{fp_of(sc, "live_match").digest,
                                              fp_of(sc, "stats").digest}));

  ASSERT_EQ(result.scripts.size(), 2u);
  const ReplayScript& first = result.scripts[0];
  EXPECT_EQ(first.target, fp_of(sc, "live_match"));
  ASSERT_EQ(first.steps.size(), 2u);
  EXPECT_EQ(first.steps[0].expected, fp_of(sc, "main"));
  EXPECT_EQ(first.steps[1].expected, fp_of(sc, "matches"));
  EXPECT_EQ(event_key(first.steps[0].event),
            event_key(enumerate_actionable(parse_ui_dump(sc.state("main").ui_dump))[0]));
  EXPECT_EQ(event_key(first.steps[1].event),
            event_key(enumerate_actionable(parse_ui_dump(sc.state("matches").ui_dump))[0]));

  const auto elapsed_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(clock_::now() - start).count();
  EXPECT_LT(elapsed_ms, 5000);
}

// Criterion 2: on 50 random deterministic scenarios the explorer discovers
// exactly the brute-force reachable set, and emits scripts for exactly the
// reachable webview states. Under 60 seconds total.
TEST(Acceptance, C2_ReachabilityOracle) {
  const auto start = clock_::now();
  for (std::uint64_t seed = 2000; seed < 2050; ++seed) {
    Scenario sc = random_scenario(seed, 10);
    SimDevice device(sc, seed);
    ExploreResult result = explore(device, fast_explore(sc.app_id));
    ASSERT_TRUE(result.exhausted) << "seed " << seed;

    std::set<std::uint64_t> oracle;
    for (const std::string& label : oracle_reachable(sc)) oracle.insert(fp_of(sc, label).digest);
    std::set<std::uint64_t> discovered;
    for (const PageState& s : result.model.states()) discovered.insert(s.fingerprint.digest);
    ASSERT_EQ(discovered, oracle) << "seed " << seed;

    std::set<std::uint64_t> oracle_web;
    for (const std::string& label : oracle_webview_reachable(sc))
      oracle_web.insert(fp_of(sc, label).digest);
    std::set<std::uint64_t> script_targets;
    for (const ReplayScript& script : result.scripts)
      script_targets.insert(script.target.digest);
    ASSERT_EQ(script_targets, oracle_web) << "seed " << seed;
  }
  const auto elapsed_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(clock_::now() - start).count();
  EXPECT_LT(elapsed_ms, 60000);
}

// Criterion 3: deterministic replay reaches every emitted script with zero
// retries; at drop probability 0.2 and retry limit 5, 100 seeded runs of a
// 4-step script all reach; with retry limit 0 the same seeds fail somewhere.
TEST(Acceptance, C3_ReplaySoundnessAndFlakeTolerance) {
  Scenario sc = load_scenario(kDemoScenario);
  SimDevice explore_device(sc);
  ExploreResult result = explore(explore_device, fast_explore("com.demo.sports"));
  ASSERT_FALSE(result.scripts.empty());
  for (const ReplayScript& script : result.scripts) {
    SimDevice device(load_scenario(kDemoScenario));
    ReplayOutcome outcome = replay(device, script, 5);
    ASSERT_EQ(outcome.status, ReplayOutcome::Status::Reached);
    EXPECT_EQ(outcome.retries_used, 0);
    // soundness: the live page equals the target at return time
    EXPECT_EQ(fingerprint(parse_ui_dump(device.dump_ui())), script.target);
  }

  Scenario det_chain = chain_scenario(4, 0.0);
  ReplayScript chain_script;
  chain_script.app_id = det_chain.app_id;
  for (int i = 0; i < 4; ++i) {
    const std::string label = "c" + std::to_string(i);
    chain_script.steps.push_back(
        {fp_of(det_chain, label), button_tap(det_chain.state(label).ui_dump, 0)});
  }
  chain_script.target = fp_of(det_chain, "c4");

  for (int seed = 1; seed <= 100; ++seed) {
    SimDevice device(chain_scenario(4, 0.2), static_cast<std::uint64_t>(seed));
    ASSERT_EQ(replay(device, chain_script, 5).status, ReplayOutcome::Status::Reached)
        << "seed " << seed;
  }
  int unreachable = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    SimDevice device(chain_scenario(4, 0.2), static_cast<std::uint64_t>(seed));
    if (replay(device, chain_script, 0).status == ReplayOutcome::Status::Unreachable)
      ++unreachable;
  }
  EXPECT_GE(unreachable, 1);
}

// Criterion 4: the authored 5-request trace maps to 5 archive entries whose
// times match a trace-walking oracle within 1 ms, the archive passes the
// structural schema, and page load time is exact.
TEST(Acceptance, C4_HarFidelity) {
  Scenario sc = load_scenario(kDemoScenario);
  const auto& trace = sc.state("live_match").network_trace;
  HarLog har = build_har(trace, "https://sports.example.com/match/88");
  ASSERT_EQ(har.entries.size(), 5u);

  std::map<std::string, std::pair<double, double>> spans;  // request id -> (first, last)
  std::map<std::string, std::string> urls;
  for (const NetworkEvent& ev : trace) {
    if (ev.request_id.empty()) continue;
    auto [it, inserted] = spans.try_emplace(ev.request_id, ev.timestamp, ev.timestamp);
    if (!inserted) it->second.second = ev.timestamp;
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent) urls[ev.request_id] = ev.url;
  }
  for (const HarEntry& entry : har.entries) {
    double oracle_ms = -1;
    for (const auto& [id, url] : urls)
      if (url == entry.url) oracle_ms = (spans[id].second - spans[id].first) * 1000.0;
    ASSERT_GE(oracle_ms, 0) << entry.url;
    EXPECT_NEAR(entry.time, oracle_ms, 1.0) << entry.url;
  }

  auto problems = droidmeter::testing::validate_har(to_json(har));
  EXPECT_TRUE(problems.empty()) << (problems.empty() ? "" : problems.front());

  double first_request = -1, fired = -1;
  for (const NetworkEvent& ev : trace) {
    if (ev.kind == NetworkEvent::Kind::RequestWillBeSent && first_request < 0)
      first_request = ev.timestamp;
    if (ev.kind == NetworkEvent::Kind::LoadEventFired) fired = ev.timestamp;
  }
  EXPECT_EQ(page_load_time(trace),
            static_cast<std::int64_t>(std::llround((fired - first_request) * 1000.0)));
}

// Criterion 5: 200 random completeness step functions against an independent
// summation oracle, plus the worked three-frame example and the SI bounds.
TEST(Acceptance, C5_SpeedIndexOracle) {
  auto gray = [](std::int64_t t, std::int64_t dark, std::int64_t light) {
    FrameSample frame;
    frame.t_ms = t;
    for (size_t c = 0; c < 3; ++c) {
      frame.histogram[c][0] = dark;
      frame.histogram[c][255] = light;
    }
    return frame;
  };

  std::vector<FrameSample> worked{gray(0, 1000, 0), gray(500, 500, 500), gray(1000, 0, 1000)};
  EXPECT_DOUBLE_EQ(speed_index(worked), 750.0);

  std::mt19937_64 rng(31337);
  constexpr std::int64_t kPixels = 2000;
  for (int round = 0; round < 200; ++round) {
    const int frames_n = 2 + static_cast<int>(rng() % 49);
    std::vector<FrameSample> frames;
    std::vector<double> vc;
    std::int64_t t = static_cast<std::int64_t>(rng() % 1000);
    for (int i = 0; i < frames_n; ++i) {
      std::int64_t lit;
      if (i == 0) lit = 0;
      else if (i == frames_n - 1) lit = kPixels;
      else lit = static_cast<std::int64_t>(rng() % (kPixels + 1));
      frames.push_back(gray(t, kPixels - lit, lit));
      vc.push_back(static_cast<double>(lit) / static_cast<double>(kPixels));
      t += 1 + static_cast<std::int64_t>(rng() % 300);
    }
    double oracle = 0;
    for (int i = 0; i + 1 < frames_n; ++i)
      oracle += (1.0 - vc[static_cast<size_t>(i)]) *
                static_cast<double>(frames[static_cast<size_t>(i) + 1].t_ms -
                                    frames[static_cast<size_t>(i)].t_ms);
    const double si = speed_index(frames);
    ASSERT_NEAR(si, oracle, 1.0) << "round " << round;
    ASSERT_GE(si, 0.0) << "round " << round;
    ASSERT_LE(si, static_cast<double>(frames.back().t_ms - frames.front().t_ms) + 1e-9)
        << "round " << round;
  }
}

// Criterion 6: the marker stream BEGIN@100 / END@250 / FULLY_DRAWN@900 gives
// onCreate = 150 ms and fully-drawn = 800 ms; only the first FULLY_DRAWN per
// instance counts.
TEST(Acceptance, C6_ActivityTiming) {
  std::vector<LogLine> lines{
      {100, "DM_ONCREATE_BEGIN com.app.Target"},
      {250, "DM_ONCREATE_END com.app.Target"},
      {900, "DM_FULLY_DRAWN com.app.Target"},
      {1100, "DM_FULLY_DRAWN com.app.Target"},  // repeated call: ignored
  };
  auto timings = parse_activity_timing(lines);
  ASSERT_EQ(timings.size(), 1u);
  EXPECT_EQ(timings[0].oncreate_ms(), 150);
  ASSERT_TRUE(timings[0].fully_drawn_ms().has_value());
  EXPECT_EQ(*timings[0].fully_drawn_ms(), 800);
  EXPECT_EQ(*timings[0].fully_drawn, 900);
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
}

// Criterion 7: a `save` over the command port mid-exploration produces a
// model.json that parses and satisfies the model invariants; Ctrl-C saves and
// exits 0. Runs the real CLI binary.
TEST(Acceptance, C7_CommandPortAndInterrupt) {
  TempDir dir("acceptance_c7");
  const std::uint16_t port = net::pick_free_port();
  const auto config_path = dir.path() / "run.conf";
  {
    std::ofstream out(config_path);
    out << "device = sim:" << kDemoScenario << "\n"
        << "app_id = com.demo.sports\n"
        << "output_dir = " << (dir.path() / "out").string() << "\n"
        << "command_port = " << port << "\n"
        << "max_explore_ms = 120000\n"
        << "event_delay_ms = 40\n";  // slow the loop so commands land mid-run
  }

  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    execl(DROIDMETER_BIN, "droidmeter", "explore", "--config", config_path.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }

  // the command port comes up before exploration starts
  std::optional<net::TcpSocket> sock;
  for (int attempt = 0; attempt < 100 && !sock; ++attempt) {
    try {
      sock = net::TcpSocket::connect("127.0.0.1", port, 500);
    } catch (const NetError&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  ASSERT_TRUE(sock.has_value());

  auto command = [&](const std::string& line) {
    sock->send_all(line + "\n");
    std::string reply;
    while (reply.find('\n') == std::string::npos) {
      auto chunk = sock->recv_some(256, 200);
      if (chunk && chunk->empty()) break;
      if (chunk) reply += *chunk;
    }
    return reply;
  };

  EXPECT_EQ(command("foo"), "err unknown\n");
  EXPECT_EQ(command("save"), "ok\n");

  const auto model_path = dir.path() / "out" / "model.json";
  ASSERT_TRUE(std::filesystem::exists(model_path));
  TransitionModel snapshot =
      TransitionModel::from_json(nlohmann::json::parse(slurp(model_path)));
  snapshot.validate();
  EXPECT_GE(snapshot.states().size(), 1u);

  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  kill(pid, SIGINT);
  EXPECT_EQ(wait_exit(pid), 0);

  // the interrupt-time save is present and loadable
  TransitionModel final_model =
      TransitionModel::from_json(nlohmann::json::parse(slurp(model_path)));
  final_model.validate();
}

// Criterion 8: with fixed seeds, two full explore+replay passes produce
// byte-identical model.json, scripts, page.har, and metrics.json.
TEST(Acceptance, C8_Determinism) {
  auto run_pass = [&](const std::filesystem::path& out) {
    Config config;
    config.device = "sim:" + kDemoScenario;
    config.app_id = "com.demo.sports";
    config.output_dir = out.string();
    config.command_port = net::pick_free_port();
    config.quiescence_ms = 150;
    config.max_wait_ms = 5000;
    config.rng_seed = 11;
    ASSERT_EQ(run_explore(config), 0);
    ASSERT_EQ(run_measure(config), 0);
  };

  TempDir first("acceptance_c8a");
  TempDir second("acceptance_c8b");
  run_pass(first.path());
  run_pass(second.path());

  std::vector<std::filesystem::path> relative{"model.json"};
  for (const auto& entry : std::filesystem::directory_iterator(first.path()))
    if (entry.path().filename().string().rfind("script_", 0) == 0)
      relative.push_back(entry.path().filename());
  for (const auto& entry : std::filesystem::directory_iterator(first.path() / "runs")) {
    relative.push_back(std::filesystem::path("runs") / entry.path().filename() / "page.har");
    relative.push_back(std::filesystem::path("runs") / entry.path().filename() /
                       "metrics.json");
  }
  ASSERT_GE(relative.size(), 7u);  // model + 2 scripts + 2x(har + metrics)

  for (const auto& rel : relative) {
    ASSERT_TRUE(std::filesystem::exists(second.path() / rel)) << rel;
    EXPECT_EQ(slurp(first.path() / rel), slurp(second.path() / rel)) << rel;
  }
}

}  // namespace
