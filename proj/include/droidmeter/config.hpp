#pragma once

// Run configuration: a flat `key = value` text file. Unknown keys are
// rejected so typos fail loudly. The DROIDMETER_OUTPUT environment variable
// overrides output_dir.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "droidmeter/errors.hpp"

namespace droidmeter {

struct Config {
  std::string device;  // device serial, or "sim:<scenario path>"
  std::string app_id;
  std::int64_t max_explore_ms = 600000;
  int max_depth = 10;
  int dump_retry = 3;
  int retry_limit = 5;
  std::int64_t quiescence_ms = 2000;
  std::int64_t max_wait_ms = 30000;
  int command_port = 4723;
  std::string output_dir = "droidmeter_out";
  std::optional<std::uint64_t> rng_seed;
  std::int64_t event_delay_ms = 0;

  bool is_simulated() const { return device.rfind("sim:", 0) == 0; }
  std::string scenario_path() const { return device.substr(4); }

  bool operator==(const Config&) const = default;
};

namespace detail {

inline std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Config parse_config(const std::string& text, const std::string& origin = "<memory>") {
  Config config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (auto semi = line.find(';'); semi != std::string::npos) line.resize(semi);
    const std::string stripped = detail::strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::strip(stripped.substr(0, eq));
    const std::string value = detail::strip(stripped.substr(eq + 1));

    auto as_i64 = [&]() -> std::int64_t {
      try {
        return std::stoll(value);
      } catch (...) {
        throw ConfigError(origin + ": key '" + key + "' needs an integer, got '" + value + "'");
      }
    };

    if (key == "device") config.device = value;
    else if (key == "app_id") config.app_id = value;
    else if (key == "max_explore_ms") config.max_explore_ms = as_i64();
    else if (key == "max_depth") config.max_depth = static_cast<int>(as_i64());
    else if (key == "dump_retry") config.dump_retry = static_cast<int>(as_i64());
    else if (key == "retry_limit") config.retry_limit = static_cast<int>(as_i64());
    else if (key == "quiescence_ms") config.quiescence_ms = as_i64();
    else if (key == "max_wait_ms") config.max_wait_ms = as_i64();
    else if (key == "command_port") config.command_port = static_cast<int>(as_i64());
    else if (key == "output_dir") config.output_dir = value;
    else if (key == "rng_seed") config.rng_seed = static_cast<std::uint64_t>(as_i64());
    else if (key == "event_delay_ms") config.event_delay_ms = as_i64();
    else throw ConfigError(origin + ": unknown key '" + key + "'");
  }

  if (const char* env = std::getenv("DROIDMETER_OUTPUT"); env && *env) config.output_dir = env;

  if (config.device.empty()) throw ConfigError(origin + ": 'device' is required");
  if (config.app_id.empty()) throw ConfigError(origin + ": 'app_id' is required");
  if (config.command_port < 1 || config.command_port > 65535)
    throw ConfigError(origin + ": command_port must be within [1, 65535]");
  if (config.max_explore_ms <= 0) throw ConfigError(origin + ": max_explore_ms must be > 0");
  if (config.max_depth <= 0) throw ConfigError(origin + ": max_depth must be > 0");
  if (config.dump_retry < 0) throw ConfigError(origin + ": dump_retry must be >= 0");
  if (config.retry_limit < 0) throw ConfigError(origin + ": retry_limit must be >= 0");
  return config;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

// Effective configuration with defaults applied; parsing this text again
// yields an identical Config.
inline std::string to_ini(const Config& config) {
  std::ostringstream out;
  out << "device = " << config.device << "\n";
  out << "app_id = " << config.app_id << "\n";
  out << "max_explore_ms = " << config.max_explore_ms << "\n";
  out << "max_depth = " << config.max_depth << "\n";
  out << "dump_retry = " << config.dump_retry << "\n";
  out << "retry_limit = " << config.retry_limit << "\n";
  out << "quiescence_ms = " << config.quiescence_ms << "\n";
  out << "max_wait_ms = " << config.max_wait_ms << "\n";
  out << "command_port = " << config.command_port << "\n";
  out << "output_dir = " << config.output_dir << "\n";
  if (config.rng_seed) out << "rng_seed = " << *config.rng_seed << "\n";
  out << "event_delay_ms = " << config.event_delay_ms << "\n";
  return out.str();
}

}  // namespace droidmeter
