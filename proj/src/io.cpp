#include "memoctrl/io.hpp"

#include "memoctrl/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace memoctrl {
namespace io {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& field, const std::string& where) {
  const char* s = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ConfigError("not a number in " + where + ": '" + field + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const json& require(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string(what) + " is missing key '" + key + "'");
  return j.at(key);
}

} // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& y) {
  std::string out = "t";
  for (int i = 0; i < y.dim(); ++i) out += ",v" + std::to_string(i);
  out += "\n";
  for (int k = 0; k <= y.grid.steps; ++k) {
    out += fmt17(y.grid.node(k));
    for (int i = 0; i < y.dim(); ++i) out += "," + fmt17(y.values(i, k));
    out += "\n";
  }
  write_text_file(path, out);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 2 || header[0] != "t")
    throw ConfigError("trajectory header must be t,v0,...: " + path);
  const int d = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < d; ++i)
    if (header[i + 1] != "v" + std::to_string(i))
      throw ConfigError("trajectory header must be t,v0,...: " + path);

  std::vector<double> times;
  std::vector<double> data; // row-major rows
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (static_cast<int>(fields.size()) != d + 1)
      throw ConfigError("trajectory row " + std::to_string(row + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(d + 1) + ": " + path);
    const std::string where = path + " row " + std::to_string(row + 1);
    times.push_back(parse_double(fields[0], where));
    for (int i = 0; i < d; ++i) data.push_back(parse_double(fields[i + 1], where));
    ++row;
  }
  if (row < 3) throw ConfigError("trajectory needs at least 3 rows: " + path);

  const int steps = row - 1;
  const double T = times.back();
  if (!(T > 0.0)) throw ConfigError("trajectory must end at a positive time: " + path);
  const TimeGrid grid(T, steps);
  const double tol = 1e-9 * std::max(1.0, T);
  for (int k = 0; k <= steps; ++k)
    if (std::abs(times[static_cast<std::size_t>(k)] - grid.node(k)) > tol)
      throw ConfigError("trajectory time column is not a uniform grid from 0: " + path);

  Eigen::MatrixXd values(d, steps + 1);
  for (int k = 0; k <= steps; ++k)
    for (int i = 0; i < d; ++i)
      values(i, k) = data[static_cast<std::size_t>(k) * d + i];
  return Trajectory(grid, std::move(values));
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j.at(0).is_array() || j.at(0).empty())
    throw ConfigError("matrix rows must be non-empty arrays");
  const std::size_t cols = j.at(0).size();
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j.at(i);
    if (!row.is_array() || row.size() != cols)
      throw ConfigError("matrix rows have inconsistent lengths");
    for (std::size_t c = 0; c < cols; ++c) {
      const json& x = row.at(c);
      if (!x.is_number()) throw ConfigError("matrix entries must be numbers");
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x.get<double>();
    }
  }
  return M;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("vector must be a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j.at(i).is_number()) throw ConfigError("vector entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  }
  return v;
}

ExpPolyKernel kernel_from_json(const json& j, int dim) {
  if (dim < 1) throw ConfigError("kernel dimension must be positive");
  if (!j.is_array()) throw ConfigError("kernel literal must be an array of terms");
  std::vector<KernelTerm> terms;
  for (const json& tj : j) {
    KernelTerm term;
    const json& a = require(tj, "a", "kernel term");
    if (!a.is_number()) throw ConfigError("kernel exponent 'a' must be a number");
    term.exponent = a.get<double>();
    const json& coeffs = require(tj, "coeffs", "kernel term");
    if (!coeffs.is_array() || coeffs.empty())
      throw ConfigError("kernel 'coeffs' must be a non-empty array");
    for (const json& cj : coeffs) {
      if (cj.is_number()) {
        term.coeffs.push_back(cj.get<double>() *
                              Eigen::MatrixXd::Identity(dim, dim));
      } else {
        Eigen::MatrixXd C = matrix_from_json(cj);
        if (C.rows() != dim || C.cols() != dim)
          throw ConfigError("kernel coefficient must be " + std::to_string(dim) + "x" +
                            std::to_string(dim));
        term.coeffs.push_back(std::move(C));
      }
    }
    terms.push_back(std::move(term));
  }
  return ExpPolyKernel(dim, std::move(terms));
}

json kernel_to_json(const ExpPolyKernel& k) {
  json out = json::array();
  for (const auto& term : k.terms()) {
    json tj;
    tj["a"] = term.exponent;
    json coeffs = json::array();
    for (const auto& C : term.coeffs) {
      if (k.dim() == 1)
        coeffs.push_back(C(0, 0));
      else
        coeffs.push_back(matrix_to_json(C));
    }
    tj["coeffs"] = std::move(coeffs);
    out.push_back(std::move(tj));
  }
  return out;
}

json rank_report_to_json(const RankReport& rep) {
  json j;
  j["condition"] = to_string(rep.condition);
  j["verdict"] = to_string(rep.verdict);
  j["rank"] = rep.rank;
  j["target"] = rep.target;
  j["blocks_used"] = rep.blocks_used;
  j["stop_reason"] = rep.stop_reason;
  j["singular_values"] = vector_to_json(rep.singular_values);
  if (rep.necessary_too.has_value()) j["necessary_too"] = *rep.necessary_too;
  return j;
}

json synthesis_to_json(const SynthesisResult& res) {
  json j;
  j["terminal_state_norm"] = res.terminal_state_norm;
  j["memory_norm"] = res.memory_norm;
  j["cost"] = res.cost;
  j["iterations"] = res.iterations;
  j["epsilon"] = res.epsilon;
  j["converged"] = res.converged;
  j["residual_history"] = res.residual_history;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
  out.close();
  if (!out) throw Error("failed writing file: " + path);
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

} // namespace io
} // namespace memoctrl
