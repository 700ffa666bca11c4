#include "memoctrl/parabolic.hpp"

#include "memoctrl/log.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace memoctrl {

namespace {

void check_window(const MovingWindow& win) {
  if (!std::isfinite(win.c0) || !std::isfinite(win.c1))
    throw std::invalid_argument("window centers must be finite");
  if (!(win.r > 0.0) || !std::isfinite(win.r))
    throw std::invalid_argument("window half-width must be positive");
}

void check_horizon(double T) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("horizon must be positive");
}

// Times at which node x lies in the open window, as a closed subinterval of
// [0, T] (empty -> nullopt). The center moves linearly, so the preimage of
// (x - r, x + r) is an interval.
std::optional<std::pair<double, double>> node_active_interval(const MovingWindow& win,
                                                              double x, double T) {
  const double lo_c = x - win.r;
  const double hi_c = x + win.r;
  if (win.c0 == win.c1) {
    if (win.c0 > lo_c && win.c0 < hi_c) return std::make_pair(0.0, T);
    return std::nullopt;
  }
  const double v = (win.c1 - win.c0) / T;
  double t0 = (lo_c - win.c0) / v;
  double t1 = (hi_c - win.c0) / v;
  if (t0 > t1) std::swap(t0, t1);
  t0 = std::max(t0, 0.0);
  t1 = std::min(t1, T);
  if (t0 >= t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

} // namespace

Mesh1D::Mesh1D(double L_, int N_) : L(L_), N(N_) {
  if (!(L > 0.0) || !std::isfinite(L))
    throw std::invalid_argument("domain length must be positive");
  if (N < 3) throw std::invalid_argument("mesh needs at least 3 interior nodes");
}

Eigen::MatrixXd discretize_laplacian(const Mesh1D& mesh) {
  const double ih2 = 1.0 / (mesh.h() * mesh.h());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(mesh.N, mesh.N);
  for (int i = 0; i < mesh.N; ++i) {
    A(i, i) = -2.0 * ih2;
    if (i > 0) A(i, i - 1) = ih2;
    if (i + 1 < mesh.N) A(i, i + 1) = ih2;
  }
  return A;
}

ControlInjector moving_support_injector(const MovingWindow& win, const Mesh1D& mesh,
                                        double T) {
  check_window(win);
  check_horizon(T);

  // Every instant must see at least one active node: merge the per-node
  // activity intervals and demand they cover [0, T] (measure-zero contact
  // points between abutting intervals are fine).
  std::vector<std::pair<double, double>> intervals;
  for (int i = 0; i < mesh.N; ++i)
    if (auto iv = node_active_interval(win, mesh.node(i), T)) intervals.push_back(*iv);
  std::sort(intervals.begin(), intervals.end());
  const double tol = 1e-12 * T;
  double reach = 0.0;
  for (const auto& [a, b] : intervals) {
    if (a > reach + tol) break;
    reach = std::max(reach, b);
  }
  if (reach < T - tol)
    throw std::invalid_argument(
        "control window misses every mesh node on part of the horizon");

  const MovingWindow w = win;
  const double horizon = T;
  const Mesh1D m = mesh;
  return ControlInjector(
      [w, horizon, m](double t) {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m.N, m.N);
        for (int i = 0; i < m.N; ++i)
          if (w.contains(m.node(i), t, horizon)) B(i, i) = 1.0;
        return B;
      },
      mesh.N, mesh.N);
}

CoverageReport coverage_check(const MovingWindow& win, const Mesh1D& mesh, double T) {
  check_window(win);
  check_horizon(T);
  const double lo = std::min(win.c0, win.c1) - win.r;
  const double hi = std::max(win.c0, win.c1) + win.r;
  CoverageReport rep;
  rep.covered = lo <= 0.0 && hi >= mesh.L;
  if (lo > 0.0) rep.uncovered.emplace_back(0.0, std::min(lo, mesh.L));
  if (hi < mesh.L) rep.uncovered.emplace_back(std::max(hi, 0.0), mesh.L);
  return rep;
}

std::string to_string(MemoryVariant v) {
  return v == MemoryVariant::StateMemory ? "state-memory" : "laplacian-memory";
}

MemorySystem assemble_system(const Mesh1D& mesh, const MovingWindow& win,
                             const ExpPolyKernel& m, const ExpPolyKernel& mtilde,
                             MemoryVariant variant, double T) {
  if (m.dim() != 1 || mtilde.dim() != 1)
    throw std::invalid_argument("memory profiles must be 1x1 kernels");
  check_horizon(T);

  const Eigen::MatrixXd A = discretize_laplacian(mesh);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(mesh.N, mesh.N);
  const ExpPolyKernel M =
      variant == MemoryVariant::StateMemory ? expand_scalar(m, I) : expand_scalar(m, A);
  const ExpPolyKernel Mtilde = expand_scalar(mtilde, I);

  const CoverageReport cov = coverage_check(win, mesh, T);
  if (!cov.covered)
    MEMOCTRL_LOG_INFO("window sweep does not cover the domain (fixed-support regime)");

  return MemorySystem(A, M, Mtilde, moving_support_injector(win, mesh, T), T);
}

} // namespace memoctrl
