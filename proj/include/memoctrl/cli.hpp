#pragma once

#include <string>

namespace memoctrl {

// Runs one CLI command end to end: parse the config at `config_path`, execute,
// write the result files into `out_dir` (created if missing).
//
// Exit codes:
//   0  command completed (including a "fails" rank verdict)
//   2  validation failure (bad command, bad config, unusable geometry);
//      no output files are written
//   3  numerical failure (singular step matrix, non-finite state, missing
//      shift matrices) or an I/O problem after validation
//   4  rank check finished inconclusive; the report is still written
//
// On a nonzero exit a single-line JSON object {"error": <category>,
// "detail": <message>} goes to stdout and a human-readable line to stderr.
int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_dir);

} // namespace memoctrl
