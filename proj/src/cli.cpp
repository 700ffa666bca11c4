#include "memoctrl/cli.hpp"

#include "memoctrl/config.hpp"
#include "memoctrl/errors.hpp"
#include "memoctrl/hum.hpp"
#include "memoctrl/io.hpp"
#include "memoctrl/log.hpp"
#include "memoctrl/parabolic.hpp"
#include "memoctrl/rank.hpp"
#include "memoctrl/volterra.hpp"

#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <string>
#include <variant>

namespace memoctrl {
namespace {

namespace fs = std::filesystem;
using io::json;

// Machine-readable single line on stdout, human-readable line on stderr.
void report_failure(const char* category, const std::string& detail) {
  json j;
  j["error"] = category;
  j["detail"] = detail;
  std::fprintf(stdout, "%s\n", j.dump().c_str());
  std::fprintf(stderr, "memoctrl: %s\n", detail.c_str());
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The only output with run-dependent content; everything else is a pure
// function of the config.
void write_run_meta(const fs::path& dir, Command cmd, const std::string& config_path) {
  json meta;
  meta["command"] = to_string(cmd);
  meta["config"] = config_path;
  meta["timestamp_utc"] = utc_timestamp();
  io::write_text_file((dir / "run_meta.json").string(), io::dump_json(meta));
}

int run_simulate(const RunConfig& cfg, const fs::path& out) {
  const auto& opt = std::get<SimulateOptions>(cfg.options);
  const Discretization disc(*cfg.system, *cfg.grid);
  const Trajectory y = disc.forward(opt.y0, opt.control ? &*opt.control : nullptr);
  const Eigen::VectorXd mem = memory_functional(cfg.system->Mtilde, y);

  io::write_trajectory_csv((out / "trajectory.csv").string(), y);
  json s;
  s["terminal_state"] = io::vector_to_json(y.at(cfg.grid->steps));
  s["terminal_state_norm"] = y.at(cfg.grid->steps).norm();
  s["memory"] = io::vector_to_json(mem);
  s["memory_norm"] = mem.norm();
  io::write_text_file((out / "summary.json").string(), io::dump_json(s));
  return 0;
}

int run_adjoint(const RunConfig& cfg, const fs::path& out) {
  const auto& opt = std::get<AdjointOptions>(cfg.options);
  const Trajectory w = solve_adjoint(*cfg.system, opt.w_T, opt.z_T, *cfg.grid);

  io::write_trajectory_csv((out / "trajectory.csv").string(), w);
  json s;
  s["w0"] = io::vector_to_json(w.at(0));
  s["w0_norm"] = w.at(0).norm();
  io::write_text_file((out / "summary.json").string(), io::dump_json(s));
  return 0;
}

int run_check_rank(const RunConfig& cfg, const fs::path& out) {
  const auto& opt = std::get<CheckRankOptions>(cfg.options);
  RankReport rep;
  switch (opt.condition) {
    case RankCondition::I:
      rep = check_condition_i(*cfg.system, opt.rank_tol, opt.max_blocks);
      break;
    case RankCondition::II:
      rep = check_condition_ii(*cfg.system, opt.rank_tol, opt.max_blocks);
      break;
    case RankCondition::III:
      rep = check_condition_iii(*cfg.system, opt.rank_tol);
      break;
  }
  io::write_text_file((out / "rank_report.json").string(),
                      io::dump_json(io::rank_report_to_json(rep)));
  MEMOCTRL_LOG_INFO("condition %s: %s (rank %d of %d, %d blocks)",
                    to_string(rep.condition).c_str(), to_string(rep.verdict).c_str(),
                    rep.rank, rep.target, rep.blocks_used);
  return rep.verdict == Verdict::Inconclusive ? 4 : 0;
}

void write_synthesis(const SynthesisResult& res, const fs::path& out) {
  io::write_trajectory_csv((out / "control.csv").string(), res.control);
  io::write_text_file((out / "synthesis.json").string(),
                      io::dump_json(io::synthesis_to_json(res)));
}

int run_synthesize(const RunConfig& cfg, const fs::path& out) {
  const auto& opt = std::get<SynthesizeOptions>(cfg.options);
  const SynthesisResult res =
      synthesize(*cfg.system, opt.y0, *cfg.grid, opt.epsilon, opt.cg_tol, opt.cg_max);
  write_synthesis(res, out);
  return 0;
}

int run_parabolic(const RunConfig& cfg, const fs::path& out) {
  const auto& opt = std::get<ParabolicOptions>(cfg.options);
  const Mesh1D mesh(opt.L, opt.N);
  const MovingWindow win{opt.c0, opt.c1, opt.r};
  const MemorySystem sys =
      assemble_system(mesh, win, opt.m, opt.mtilde, opt.variant, opt.T);
  const CoverageReport cov = coverage_check(win, mesh, opt.T);

  json sj;
  sj["L"] = mesh.L;
  sj["N"] = mesh.N;
  sj["h"] = mesh.h();
  sj["T"] = opt.T;
  sj["variant"] = to_string(opt.variant);
  {
    json w;
    w["c0"] = win.c0;
    w["c1"] = win.c1;
    w["r"] = win.r;
    sj["window"] = w;
  }
  {
    json c;
    c["covered"] = cov.covered;
    json gaps = json::array();
    for (const auto& [a, b] : cov.uncovered) gaps.push_back(json::array({a, b}));
    c["uncovered"] = gaps;
    sj["coverage"] = c;
  }
  sj["kernel"] = io::kernel_to_json(opt.m);
  sj["kernel_tilde"] = io::kernel_to_json(opt.mtilde);
  io::write_text_file((out / "system.json").string(), io::dump_json(sj));

  const SynthesisResult res =
      synthesize(sys, opt.y0, *cfg.grid, opt.epsilon, opt.cg_tol, opt.cg_max);
  write_synthesis(res, out);
  return 0;
}

int execute(const RunConfig& cfg, const fs::path& out) {
  switch (cfg.command) {
    case Command::Simulate: return run_simulate(cfg, out);
    case Command::Adjoint: return run_adjoint(cfg, out);
    case Command::CheckRank: return run_check_rank(cfg, out);
    case Command::Synthesize: return run_synthesize(cfg, out);
    case Command::Parabolic: return run_parabolic(cfg, out);
  }
  return 3;
}

} // namespace

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_dir) {
  const auto cmd = parse_command(command);
  if (!cmd) {
    report_failure("validation", "unknown command: " + command);
    return 2;
  }

  RunConfig cfg;
  try {
    cfg = parse_config(config_path, *cmd);
  } catch (const ConfigError& e) {
    report_failure("validation", e.what());
    return 2;
  }
  MEMOCTRL_LOG_INFO("parsed %s config from %s", command.c_str(), config_path.c_str());

  const fs::path out(out_dir);
  try {
    fs::create_directories(out);
  } catch (const fs::filesystem_error& e) {
    report_failure("io", std::string("cannot create output directory: ") + e.what());
    return 3;
  }

  try {
    const int code = execute(cfg, out);
    write_run_meta(out, *cmd, config_path);
    return code;
  } catch (const SolverError& e) {
    report_failure("numerical", e.what());
    return 3;
  } catch (const InapplicableError& e) {
    report_failure("numerical", e.what());
    return 3;
  } catch (const Error& e) {
    report_failure("io", e.what());
    return 3;
  } catch (const std::exception& e) {
    report_failure("internal", e.what());
    return 3;
  }
}

} // namespace memoctrl
