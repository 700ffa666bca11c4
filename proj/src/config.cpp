#include "memoctrl/config.hpp"

#include "memoctrl/errors.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <utility>

namespace memoctrl {

namespace {

using io::json;

json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items())
    if (allowed.find(item.key()) == allowed.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + " is missing key '" + key + "'");
  return j.at(key);
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

double get_number_or(const json& j, const std::string& key, const std::string& where,
                     double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer())
    throw ConfigError("'" + key + "' in " + where + " must be an integer");
  return v.get<int>();
}

int get_int_or(const json& j, const std::string& key, const std::string& where,
               int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError("'" + key + "' in " + where + " must be an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) throw ConfigError("'" + key + "' in " + where + " must be a string");
  return v.get<std::string>();
}

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
}

TimeGrid parse_grid(const json& doc) {
  const json& g = require(doc, "grid", "config");
  reject_unknown_keys(g, {"T", "steps"}, "grid");
  const double T = get_number(g, "T", "grid");
  const int steps = get_int(g, "steps", "grid");
  check_positive(T, "grid T");
  if (steps < 2) throw ConfigError("grid steps must be at least 2");
  return TimeGrid(T, steps);
}

MemorySystem parse_system(const json& doc, double default_T) {
  const json& s = require(doc, "system", "config");
  reject_unknown_keys(s, {"A", "M", "M_tilde", "B", "T"}, "system");

  Eigen::MatrixXd A;
  try {
    A = io::matrix_from_json(require(s, "A", "system"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("system A: ") + e.what());
  }
  if (A.rows() != A.cols()) throw ConfigError("system A must be square");
  const int n = static_cast<int>(A.rows());

  ExpPolyKernel M = ExpPolyKernel::zero(n);
  ExpPolyKernel Mtilde = ExpPolyKernel::zero(n);
  if (s.contains("M")) M = io::kernel_from_json(s.at("M"), n);
  if (s.contains("M_tilde")) Mtilde = io::kernel_from_json(s.at("M_tilde"), n);

  Eigen::MatrixXd B;
  try {
    B = io::matrix_from_json(require(s, "B", "system"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("system B: ") + e.what());
  }
  if (B.rows() != n)
    throw ConfigError("system B must have " + std::to_string(n) + " rows");

  const double T = get_number_or(s, "T", "system", default_T);
  check_positive(T, "system T");

  try {
    return MemorySystem(A, std::move(M), std::move(Mtilde), ControlInjector(B), T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

Eigen::VectorXd parse_state(const json& doc, const std::string& key, int n,
                            const std::string& what) {
  Eigen::VectorXd v;
  try {
    v = io::vector_from_json(require(doc, key, "config"));
  } catch (const ConfigError& e) {
    throw ConfigError(what + ": " + e.what());
  }
  if (v.size() != n)
    throw ConfigError(what + " must have length " + std::to_string(n));
  if (!v.allFinite()) throw ConfigError(what + " must be finite");
  return v;
}

void check_grid_matches(const TimeGrid& grid, const MemorySystem& sys) {
  const double tol = 1e-12 * (1.0 + std::max(std::abs(grid.T), std::abs(sys.T)));
  if (std::abs(grid.T - sys.T) > tol)
    throw ConfigError("grid T and system T disagree");
}

RunConfig parse_simulate(const json& doc) {
  reject_unknown_keys(doc, {"command", "system", "grid", "initial_state", "control"},
                      "config");
  RunConfig cfg;
  cfg.command = Command::Simulate;
  cfg.grid = parse_grid(doc);
  cfg.system = parse_system(doc, cfg.grid->T);
  check_grid_matches(*cfg.grid, *cfg.system);

  Eigen::VectorXd y0 = parse_state(doc, "initial_state", cfg.system->n(), "initial_state");
  if (doc.contains("control")) {
    const std::string path = get_string(doc, "control", "config");
    Trajectory u = io::read_trajectory_csv(path);
    if (u.dim() != cfg.system->m())
      throw ConfigError("control trajectory has dimension " + std::to_string(u.dim()) +
                        ", system expects " + std::to_string(cfg.system->m()));
    if (!u.grid.same_as(*cfg.grid))
      throw ConfigError("control trajectory grid does not match the config grid");
    cfg.options = SimulateOptions{std::move(y0), std::move(u)};
  } else {
    cfg.options = SimulateOptions{std::move(y0), std::nullopt};
  }
  return cfg;
}

RunConfig parse_adjoint(const json& doc) {
  reject_unknown_keys(doc, {"command", "system", "grid", "w_T", "z_T"}, "config");
  RunConfig cfg;
  cfg.command = Command::Adjoint;
  cfg.grid = parse_grid(doc);
  cfg.system = parse_system(doc, cfg.grid->T);
  check_grid_matches(*cfg.grid, *cfg.system);

  AdjointOptions opt;
  opt.w_T = parse_state(doc, "w_T", cfg.system->n(), "w_T");
  opt.z_T = parse_state(doc, "z_T", cfg.system->n(), "z_T");
  cfg.options = std::move(opt);
  return cfg;
}

RunConfig parse_check_rank(const json& doc) {
  reject_unknown_keys(doc, {"command", "system", "condition", "rank_tol", "max_blocks"},
                      "config");
  RunConfig cfg;
  cfg.command = Command::CheckRank;
  cfg.system = parse_system(doc, 1.0);

  CheckRankOptions opt;
  const std::string cond = get_string(doc, "condition", "config");
  if (cond == "i")
    opt.condition = RankCondition::I;
  else if (cond == "ii")
    opt.condition = RankCondition::II;
  else if (cond == "iii")
    opt.condition = RankCondition::III;
  else
    throw ConfigError("condition must be one of i, ii, iii");
  opt.rank_tol = get_number_or(doc, "rank_tol", "config", 1e-12);
  check_positive(opt.rank_tol, "rank_tol");
  opt.max_blocks = get_int_or(doc, "max_blocks", "config", 0);
  if (doc.contains("max_blocks") && opt.max_blocks < 1)
    throw ConfigError("max_blocks must be at least 1");
  if (!cfg.system->B.is_constant())
    throw ConfigError("rank conditions require a constant B");
  cfg.options = opt;
  return cfg;
}

RunConfig parse_synthesize(const json& doc) {
  reject_unknown_keys(
      doc, {"command", "system", "grid", "initial_state", "epsilon", "cg_tol", "cg_max"},
      "config");
  RunConfig cfg;
  cfg.command = Command::Synthesize;
  cfg.grid = parse_grid(doc);
  cfg.system = parse_system(doc, cfg.grid->T);
  check_grid_matches(*cfg.grid, *cfg.system);

  SynthesizeOptions opt;
  opt.y0 = parse_state(doc, "initial_state", cfg.system->n(), "initial_state");
  opt.epsilon = get_number(doc, "epsilon", "config");
  check_positive(opt.epsilon, "epsilon");
  opt.cg_tol = get_number_or(doc, "cg_tol", "config", 1e-10);
  check_positive(opt.cg_tol, "cg_tol");
  opt.cg_max = get_int_or(doc, "cg_max", "config", 0);
  if (doc.contains("cg_max") && opt.cg_max < 1)
    throw ConfigError("cg_max must be at least 1");
  cfg.options = std::move(opt);
  return cfg;
}

RunConfig parse_parabolic(const json& doc) {
  reject_unknown_keys(
      doc,
      {"command", "parabolic", "grid", "initial_state", "epsilon", "cg_tol", "cg_max"},
      "config");
  RunConfig cfg;
  cfg.command = Command::Parabolic;
  cfg.grid = parse_grid(doc);

  const json& p = require(doc, "parabolic", "config");
  reject_unknown_keys(p, {"L", "N", "T", "window", "kernel", "kernel_tilde", "variant"},
                      "parabolic");

  ParabolicOptions opt;
  opt.L = get_number(p, "L", "parabolic");
  check_positive(opt.L, "parabolic L");
  opt.N = get_int(p, "N", "parabolic");
  if (opt.N < 3) throw ConfigError("parabolic N must be at least 3");
  opt.T = get_number(p, "T", "parabolic");
  check_positive(opt.T, "parabolic T");
  {
    const double tol = 1e-12 * (1.0 + std::max(std::abs(opt.T), std::abs(cfg.grid->T)));
    if (std::abs(opt.T - cfg.grid->T) > tol)
      throw ConfigError("parabolic T and grid T disagree");
  }

  const json& w = require(p, "window", "parabolic");
  reject_unknown_keys(w, {"c0", "c1", "r"}, "window");
  opt.c0 = get_number(w, "c0", "window");
  opt.c1 = get_number(w, "c1", "window");
  opt.r = get_number(w, "r", "window");
  check_positive(opt.r, "window r");

  opt.m = p.contains("kernel") ? io::kernel_from_json(p.at("kernel"), 1)
                               : ExpPolyKernel::zero(1);
  opt.mtilde = p.contains("kernel_tilde") ? io::kernel_from_json(p.at("kernel_tilde"), 1)
                                          : ExpPolyKernel::zero(1);

  const std::string variant = get_string(p, "variant", "parabolic");
  if (variant == "state-memory")
    opt.variant = MemoryVariant::StateMemory;
  else if (variant == "laplacian-memory")
    opt.variant = MemoryVariant::LaplacianMemory;
  else
    throw ConfigError("variant must be state-memory or laplacian-memory");

  // Reject geometry the injector cannot serve before any computation starts.
  try {
    moving_support_injector(MovingWindow{opt.c0, opt.c1, opt.r}, Mesh1D(opt.L, opt.N),
                            opt.T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  opt.y0 = parse_state(doc, "initial_state", opt.N, "initial_state");
  opt.epsilon = get_number(doc, "epsilon", "config");
  check_positive(opt.epsilon, "epsilon");
  opt.cg_tol = get_number_or(doc, "cg_tol", "config", 1e-10);
  check_positive(opt.cg_tol, "cg_tol");
  opt.cg_max = get_int_or(doc, "cg_max", "config", 500);
  if (opt.cg_max < 1) throw ConfigError("cg_max must be at least 1");

  cfg.options = std::move(opt);
  return cfg;
}

} // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Adjoint: return "adjoint";
    case Command::CheckRank: return "check-rank";
    case Command::Synthesize: return "synthesize";
    case Command::Parabolic: return "parabolic";
  }
  return "?";
}

std::optional<Command> parse_command(const std::string& name) {
  if (name == "simulate") return Command::Simulate;
  if (name == "adjoint") return Command::Adjoint;
  if (name == "check-rank") return Command::CheckRank;
  if (name == "synthesize") return Command::Synthesize;
  if (name == "parabolic") return Command::Parabolic;
  return std::nullopt;
}

RunConfig parse_config(const std::string& path, Command command) {
  const json doc = load_document(path);
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

  if (doc.contains("command")) {
    const std::string declared = get_string(doc, "command", "config");
    if (!parse_command(declared))
      throw ConfigError("unknown command in config: " + declared);
    if (declared != to_string(command))
      throw ConfigError("config declares command '" + declared + "' but '" +
                        to_string(command) + "' was invoked");
  }

  switch (command) {
    case Command::Simulate: return parse_simulate(doc);
    case Command::Adjoint: return parse_adjoint(doc);
    case Command::CheckRank: return parse_check_rank(doc);
    case Command::Synthesize: return parse_synthesize(doc);
    case Command::Parabolic: return parse_parabolic(doc);
  }
  throw ConfigError("unhandled command");
}

} // namespace memoctrl
