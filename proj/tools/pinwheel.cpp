// Command-line front end: pinwheel <scalar|solve|sweep-beta|testfn|partition> [options]

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pinwheel/run.hpp"

using namespace pinwheel;

int main(int argc, char** argv) {
  CLI::App app{"Least-energy pinwheel solutions of competitive Schroedinger systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  bool quiet = false;
  std::map<std::string, std::string> flags;

  const std::vector<std::pair<Command, std::string>> commands{
      {Command::Scalar, "limit ground state c_inf and the symmetric scalar level c^Gn"},
      {Command::Solve, "least-energy pinwheel solution at the configured beta"},
      {Command::SweepBeta, "continuation along beta_schedule"},
      {Command::TestFn, "test-tuple energies over r_sweep and the gap decay fit"},
      {Command::Partition, "segregation analysis along beta_schedule"}};
  std::map<CLI::App*, Command> which;
  for (const auto& [cmd, help] : commands) {
    auto* sub = app.add_subcommand(command_name(cmd), help);
    sub->add_option("-c,--config", config_path, "flat JSON configuration file");
    sub->add_option("--set", sets, "override as key=value (value parsed as JSON)");
    sub->add_flag("-q,--quiet", quiet, "no progress output");
    for (const auto& key : run_config_keys())
      sub->add_option("--" + key, flags[key], "override config key '" + key + "'")->allow_extra_args(false);
    which[sub] = cmd;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Command cmd = Command::Solve;
  for (const auto& [sub, c] : which)
    if (sub->parsed()) cmd = c;

  json cfg = json::object();
  RunConfig rc;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      try {
        cfg = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
      }
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags)
      if (!value.empty()) apply_override(cfg, key, value);
    rc = run_config_from_json(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  }

  Logger log;
  if (!quiet) log = [](const std::string& s) { std::cerr << s << '\n'; };
  const int status = execute(cmd, rc, log);
  if (!quiet && status == 0) std::cerr << "wrote " << rc.out_dir << '\n';
  return status;
}
