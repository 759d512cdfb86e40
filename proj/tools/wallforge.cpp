#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wallforge/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal domain-wall heteroclinics: solve, verify, bifurcation coefficients"};
  app.require_subcommand(1, 1);
  std::string config;
  std::string out;
  for (const auto& name : wallforge::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "configuration file (key = value)")->required();
    sub->add_option("--out", out, "output directory (overrides output.dir)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wallforge::cli::kUsageExit;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return wallforge::cli::run(command, config, out, std::cout);
}
