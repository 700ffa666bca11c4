#pragma once

#include "memoctrl/hum.hpp"
#include "memoctrl/kernels.hpp"
#include "memoctrl/rank.hpp"
#include "memoctrl/volterra.hpp"

#include <json.hpp>

#include <string>

namespace memoctrl {
namespace io {

// Insertion-ordered JSON keeps output documents byte-stable across runs.
using json = nlohmann::ordered_json;

// CSV with header  t,v0,...,v{d-1},  one row per grid node, 17 significant
// digits (round-trip exact for doubles).
void write_trajectory_csv(const std::string& path, const Trajectory& y);

// Parses a trajectory CSV back; the time column must be a uniform grid from 0.
// Throws ConfigError on malformed content.
Trajectory read_trajectory_csv(const std::string& path);

json matrix_to_json(const Eigen::MatrixXd& M); // nested row arrays
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

// Kernel literal: array of terms { "a": real, "coeffs": [...] } where each
// coefficient is an n x n nested array, or a plain number c as shorthand for
// c * Identity. An empty term array is the zero kernel. `dim` fixes n (needed
// for the shorthand and the zero kernel); full matrices must match it.
ExpPolyKernel kernel_from_json(const json& j, int dim);
json kernel_to_json(const ExpPolyKernel& k); // scalar shorthand when dim == 1

json rank_report_to_json(const RankReport& rep);
json synthesis_to_json(const SynthesisResult& res);

// Writes text to path (creating parent directories is the caller's job);
// throws Error when the file cannot be written.
void write_text_file(const std::string& path, const std::string& content);

// Serialize JSON with a trailing newline.
std::string dump_json(const json& j);

} // namespace io
} // namespace memoctrl
