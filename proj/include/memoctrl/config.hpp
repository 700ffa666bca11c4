#pragma once

#include "memoctrl/io.hpp"
#include "memoctrl/parabolic.hpp"
#include "memoctrl/rank.hpp"
#include "memoctrl/volterra.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>

namespace memoctrl {

enum class Command { Simulate, Adjoint, CheckRank, Synthesize, Parabolic };

std::string to_string(Command c);
std::optional<Command> parse_command(const std::string& name);

struct SimulateOptions {
  Eigen::VectorXd y0;
  std::optional<Trajectory> control; // loaded from the referenced CSV
};

struct AdjointOptions {
  Eigen::VectorXd w_T;
  Eigen::VectorXd z_T;
};

struct CheckRankOptions {
  RankCondition condition = RankCondition::I;
  double rank_tol = 1e-12;
  int max_blocks = 0; // 0 = automatic cap
};

struct SynthesizeOptions {
  Eigen::VectorXd y0;
  double epsilon = 0;
  double cg_tol = 1e-10;
  int cg_max = 0; // 0 = default budget
};

struct ParabolicOptions {
  double L = 0;
  int N = 0;
  double T = 0;
  double c0 = 0, c1 = 0, r = 0;
  ExpPolyKernel m;      // 1x1 profile of M
  ExpPolyKernel mtilde; // 1x1 profile of Mtilde
  MemoryVariant variant = MemoryVariant::StateMemory;
  Eigen::VectorXd y0;
  double epsilon = 0;
  double cg_tol = 1e-10;
  int cg_max = 500;
};

// A fully validated run: every dimension cross-checked, referenced data files
// loaded, domain objects constructed. Parsing throws ConfigError before any
// computation when the document is malformed.
struct RunConfig {
  Command command = Command::Simulate;
  std::optional<TimeGrid> grid;        // absent for check-rank
  std::optional<MemorySystem> system;  // absent for parabolic (assembled later)
  std::variant<SimulateOptions, AdjointOptions, CheckRankOptions, SynthesizeOptions,
               ParabolicOptions>
      options;
};

// Reads and validates the JSON config at `path` for the given CLI command.
// A "command" field in the document, when present, must agree with `command`.
RunConfig parse_config(const std::string& path, Command command);

} // namespace memoctrl
