#include "memoctrl/hum.hpp"

#include "memoctrl/log.hpp"

#include <cfloat>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace memoctrl {

namespace {

void check_point(const Discretization& disc, const DualPoint& p) {
  const int n = disc.system().n();
  if (p.w_T.size() != n || p.z_T.size() != n)
    throw std::invalid_argument("dual point dimension mismatch");
  if (!p.w_T.allFinite() || !p.z_T.allFinite())
    throw std::invalid_argument("dual point must be finite");
}

Trajectory adjoint_control(const Discretization& disc, const Trajectory& w) {
  const TimeGrid& grid = disc.grid();
  Eigen::MatrixXd u(disc.system().m(), grid.steps + 1);
  for (int k = 0; k <= grid.steps; ++k)
    u.col(k).noalias() = disc.B_at(k).transpose() * w.values.col(k);
  return Trajectory(grid, std::move(u));
}

double control_energy(const TimeGrid& grid, const Trajectory& u) {
  Eigen::VectorXd samples(grid.steps + 1);
  for (int k = 0; k <= grid.steps; ++k) samples(k) = u.values.col(k).squaredNorm();
  return trapezoid(grid, samples);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
targets_of(const Discretization& disc, const Trajectory& y) {
  return {y.at(y.grid.steps), -memory_functional(disc.system().Mtilde, y)};
}

} // namespace

double objective(const Discretization& disc, const Eigen::VectorXd& y0,
                 const DualPoint& p) {
  check_point(disc, p);
  if (y0.size() != disc.system().n())
    throw std::invalid_argument("y0 dimension mismatch");
  const Trajectory w = disc.adjoint(p.w_T, p.z_T);
  const Trajectory u = adjoint_control(disc, w);
  return 0.5 * control_energy(disc.grid(), u) + w.at(0).dot(y0);
}

double objective(const MemorySystem& sys, const Eigen::VectorXd& y0, const DualPoint& p,
                 const TimeGrid& grid) {
  return objective(Discretization(sys, grid), y0, p);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
objective_gradient(const Discretization& disc, const Eigen::VectorXd& y0,
                   const DualPoint& p) {
  check_point(disc, p);
  const Trajectory w = disc.adjoint(p.w_T, p.z_T);
  const Trajectory u = adjoint_control(disc, w);
  const Trajectory y = disc.forward(y0, &u);
  return targets_of(disc, y);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
objective_gradient(const MemorySystem& sys, const Eigen::VectorXd& y0,
                   const DualPoint& p, const TimeGrid& grid) {
  return objective_gradient(Discretization(sys, grid), y0, p);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gramian_apply(const Discretization& disc,
                                                          const DualPoint& p) {
  check_point(disc, p);
  const Trajectory w = disc.adjoint(p.w_T, p.z_T);
  const Trajectory u = adjoint_control(disc, w);
  const Trajectory y =
      disc.forward(Eigen::VectorXd::Zero(disc.system().n()), &u);
  return targets_of(disc, y);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
gramian_apply(const MemorySystem& sys, const DualPoint& p, const TimeGrid& grid) {
  return gramian_apply(Discretization(sys, grid), p);
}

SynthesisResult synthesize(const MemorySystem& sys, const Eigen::VectorXd& y0,
                           const TimeGrid& grid, double epsilon, double cg_tol,
                           int cg_max) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be positive");
  if (!(cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be positive");
  const int n = sys.n();
  if (y0.size() != n) throw std::invalid_argument("y0 dimension mismatch");
  if (cg_max <= 0) cg_max = 20 * n;

  const Discretization disc(sys, grid);

  auto apply = [&](const Eigen::VectorXd& v) {
    const DualPoint p{v.head(n), v.tail(n)};
    auto [yT, mem] = gramian_apply(disc, p);
    Eigen::VectorXd out(2 * n);
    out.head(n) = yT + epsilon * p.w_T;
    out.tail(n) = mem + epsilon * p.z_T;
    return out;
  };

  // Right-hand side from the free (u = 0) solve: move its targets across.
  const Trajectory y_free = disc.forward(y0, nullptr);
  auto [yT_free, mem_free] = targets_of(disc, y_free);
  Eigen::VectorXd b(2 * n);
  b.head(n) = -yT_free;
  b.tail(n) = -mem_free;

  SynthesisResult res{Trajectory(grid, Eigen::MatrixXd::Zero(sys.m(), grid.steps + 1)),
                      0.0,
                      0.0,
                      0.0,
                      0,
                      epsilon,
                      false,
                      {}};

  Eigen::VectorXd pvec = Eigen::VectorXd::Zero(2 * n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    res.terminal_state_norm = yT_free.norm();
    res.memory_norm = mem_free.norm();
    return res;
  }

  Eigen::VectorXd r = b;
  Eigen::VectorXd d = r;
  double rs = r.squaredNorm();
  for (int it = 1; it <= cg_max; ++it) {
    const Eigen::VectorXd q = apply(d);
    const double dq = d.dot(q);
    if (!(dq > 0.0)) {
      MEMOCTRL_LOG_ERROR("cg breakdown at iteration %d (curvature %.3e)", it, dq);
      break;
    }
    const double alpha = rs / dq;
    pvec += alpha * d;
    r -= alpha * q;
    const double rnorm = r.norm();
    res.residual_history.push_back(rnorm / bnorm);
    res.iterations = it;
    if (rnorm <= cg_tol * bnorm) {
      res.converged = true;
      break;
    }
    const double rs_next = rnorm * rnorm;
    d = r + (rs_next / rs) * d;
    rs = rs_next;
  }

  const DualPoint p{pvec.head(n), pvec.tail(n)};
  const Trajectory w = disc.adjoint(p.w_T, p.z_T);
  res.control = adjoint_control(disc, w);
  const Trajectory y = disc.forward(y0, &res.control);
  auto [yT, mem] = targets_of(disc, y);
  res.terminal_state_norm = yT.norm();
  res.memory_norm = mem.norm();
  res.cost = control_energy(grid, res.control);
  MEMOCTRL_LOG_INFO("synthesis: %d iterations, |y(T)| = %.3e, |memory| = %.3e",
                    res.iterations, res.terminal_state_norm, res.memory_norm);
  return res;
}

double observability_ratio(const Discretization& disc, const DualPoint& p) {
  check_point(disc, p);
  if (p.w_T.norm() == 0.0 && p.z_T.norm() == 0.0)
    throw std::invalid_argument("observability ratio needs a nonzero dual point");
  const Trajectory w = disc.adjoint(p.w_T, p.z_T);
  const Trajectory u = adjoint_control(disc, w);
  const double den = control_energy(disc.grid(), u);
  const double num = w.at(0).squaredNorm();
  if (den <= DBL_MIN) return std::numeric_limits<double>::infinity();
  return num / den;
}

double observability_ratio(const MemorySystem& sys, const DualPoint& p,
                           const TimeGrid& grid) {
  return observability_ratio(Discretization(sys, grid), p);
}

} // namespace memoctrl
