#include "memoctrl/cli.hpp"

#include <CLI11.hpp>

#include <string>

int main(int argc, char** argv) {
  CLI::App app{"controllability toolkit for linear ODE systems with memory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "solve the forward dynamics from an initial state"},
      {"adjoint", "solve the adjoint system backwards from terminal data"},
      {"check-rank", "evaluate an algebraic rank condition for controllability"},
      {"synthesize", "compute a control driving state and memory to zero"},
      {"parabolic", "assemble a 1-D heat system with memory and control it"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "path to the JSON config")->required();
    sub->add_option("--out-dir", out_dir, "directory for result files (default .)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return memoctrl::run_command(command, config_path, out_dir);
}
