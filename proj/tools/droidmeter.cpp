// droidmeter command-line front end.
//
//   droidmeter explore --config <file>
//   droidmeter replay  --config <file> --script <file>
//   droidmeter measure --config <file> --all-scripts

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "droidmeter/app.hpp"
#include "droidmeter/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"droidmeter: find, replay, and measure embedded web pages in mobile apps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string script_path;
  bool all_scripts = false;

  CLI::App* explore_cmd = app.add_subcommand("explore", "explore the app and record replay scripts");
  explore_cmd->add_option("--config", config_path, "configuration file")->required();

  CLI::App* replay_cmd = app.add_subcommand("replay", "replay one script and collect metrics");
  replay_cmd->add_option("--config", config_path, "configuration file")->required();
  replay_cmd->add_option("--script", script_path, "replay script file")->required();

  CLI::App* measure_cmd = app.add_subcommand("measure", "replay every recorded script");
  measure_cmd->add_option("--config", config_path, "configuration file")->required();
  measure_cmd->add_flag("--all-scripts", all_scripts, "replay every script in the output folder");

  CLI11_PARSE(app, argc, argv);

  droidmeter::Config config;
  try {
    config = droidmeter::load_config(config_path);
  } catch (const droidmeter::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (explore_cmd->parsed()) return droidmeter::run_explore(config);
    if (replay_cmd->parsed()) return droidmeter::run_replay(config, script_path);
    if (measure_cmd->parsed()) return droidmeter::run_measure(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
