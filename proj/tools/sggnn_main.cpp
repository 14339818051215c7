#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

using sggnn::cli::RunConfig;

struct Staged {
  std::string config;
  std::map<std::string, std::string> flags;
};

void add_flags(CLI::App* sub, Staged& staged) {
  sub->add_option("--config", staged.config, "JSON file with RunConfig keys (flags override it)");
  RunConfig defaults;
  for (const auto& f : sggnn::cli::fields(defaults)) {
    sub->add_option("--" + f.key, staged.flags[f.key], f.help);
  }
}

/// defaults, then the config file, then explicit flags.
RunConfig resolve(CLI::App* sub, const Staged& staged) {
  RunConfig cfg = staged.config.empty() ? RunConfig{} : sggnn::cli::load_config_file(staged.config);
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [key, text] : staged.flags) {
    if (sub->count("--" + key) > 0) overrides[key] = sggnn::cli::flag_value(cfg, key, text);
  }
  sggnn::cli::apply_json(cfg, overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated graph recurrent controllers with stability certificates"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-data", "expert rollouts on sampled scenarios, split into train/validation/test"},
      {"train", "imitation training with the stability penalty (mode=stable) or without (mode=unstable)"},
      {"certify", "stability certificate of a weights file; exit 0 iff incremental ISS is certified"},
      {"eval", "closed-loop metrics over a team size x radius x delay grid"},
      {"simulate", "one rollout written as CSV"},
  };
  std::map<std::string, Staged> staged;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_flags(subs[name], staged[name]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : sggnn::cli::kFailure;
  }
  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      return sggnn::cli::run_command(name, resolve(sub, staged[name]));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return sggnn::cli::kFailure;
    }
  }
  return sggnn::cli::kFailure;
}
