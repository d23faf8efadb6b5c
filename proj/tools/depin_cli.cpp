// Command line front end: `depin <subcommand> [--config file.json] [--key value ...]`.

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "depin/errors.hpp"
#include "depin/harness.hpp"

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depinning simulator and certificate toolkit"};
  app.set_version_flag("--version", std::string(depin::kToolVersion));

  std::string command;
  std::string config_path;
  std::string list_of_commands;
  for (const auto& name : depin::subcommands()) list_of_commands += (list_of_commands.empty() ? "" : ", ") + name;
  app.add_option("command", command, "one of: " + list_of_commands)
      ->required()
      ->check(CLI::IsMember(depin::subcommands()));
  app.add_option("--config", config_path, "JSON config file (flat keys)");

  std::map<std::string, std::optional<std::string>> flags;
  for (const auto& key : depin::config_keys()) flags[key];
  for (auto& [key, value] : flags) {
    app.add_option_function<std::string>(
        "--" + dashed(key), [&value](const std::string& v) { value = v; },
        "overrides config key '" + key + "'");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return depin::kExitValidation;
  }

  depin::ExperimentConfig cfg;
  try {
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [key, value] : flags) {
      if (value) overrides[key] = depin::flag_value(key, *value);
    }
    cfg = config_path.empty() ? depin::parse_config(nullptr, overrides)
                              : depin::load_config(config_path, overrides);
  } catch (const depin::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return depin::kExitValidation;
  }
  return depin::run_command(command, cfg, std::cerr, std::cerr);
}
