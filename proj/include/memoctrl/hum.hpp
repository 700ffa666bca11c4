#pragma once

#include "memoctrl/volterra.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace memoctrl {

// Terminal data (w_T, z_T) of the adjoint system: the variable of the dual
// minimization problem.
struct DualPoint {
  Eigen::VectorXd w_T;
  Eigen::VectorXd z_T;
};

struct SynthesisResult {
  Trajectory control;             // u = B(.)^T w on the grid
  double terminal_state_norm = 0; // |y(T)|_2 of the controlled solve
  double memory_norm = 0;         // |int_0^T Mtilde(T-s) y(s) ds|_2
  double cost = 0;                // int_0^T |u|^2 dt
  int iterations = 0;
  double epsilon = 0;
  bool converged = false;
  std::vector<double> residual_history; // relative CG residuals per iteration
};

// Dual quadratic functional
//   J(w_T, z_T) = 1/2 int_0^T |B(t)^T w(t)|^2 dt + (w(0), y0),
// where w solves the adjoint system with data (w_T, z_T). Its minimizer
// yields the minimal-norm control u = B(.)^T w.
double objective(const Discretization& disc, const Eigen::VectorXd& y0,
                 const DualPoint& p);
double objective(const MemorySystem& sys, const Eigen::VectorXd& y0, const DualPoint& p,
                 const TimeGrid& grid);

// Gradient of J at p in the (w_T, z_T) pairing:
//   (y(T), -int_0^T Mtilde(T-t) y(t) dt)
// with y the controlled solve from y0 under u = B(.)^T w. Both components
// vanish exactly at a minimizer, which is the two-part control target.
std::pair<Eigen::VectorXd, Eigen::VectorXd>
objective_gradient(const Discretization& disc, const Eigen::VectorXd& y0,
                   const DualPoint& p);
std::pair<Eigen::VectorXd, Eigen::VectorXd>
objective_gradient(const MemorySystem& sys, const Eigen::VectorXd& y0,
                   const DualPoint& p, const TimeGrid& grid);

// The controllability Gramian: the linear part of the gradient,
//   Lambda p = (y0(T), -int Mtilde(T-t) y0(t) dt),
// with y0 the solve from zero initial state under u = B(.)^T w. One adjoint
// plus one forward solve; symmetric positive semidefinite in the discrete
// pairing up to the quadrature defect of the scheme.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gramian_apply(const Discretization& disc,
                                                          const DualPoint& p);
std::pair<Eigen::VectorXd, Eigen::VectorXd>
gramian_apply(const MemorySystem& sys, const DualPoint& p, const TimeGrid& grid);

// Penalized duality synthesis: conjugate gradient on
//   (Lambda + epsilon I) p = (-y_free(T), +int Mtilde(T-t) y_free dt),
// then u = B(.)^T w(p) and a verification solve of the controlled system.
// cg_max <= 0 selects the default budget 20 n. Non-convergence within cg_max
// returns the partial result with converged = false.
SynthesisResult synthesize(const MemorySystem& sys, const Eigen::VectorXd& y0,
                           const TimeGrid& grid, double epsilon, double cg_tol = 1e-10,
                           int cg_max = 0);

// Sample of the observability quotient |w(0)|^2 / int |B^T w|^2 dt; each
// value lower-bounds the observability constant. Infinity when the
// denominator underflows (the data is invisible to the control operator).
double observability_ratio(const Discretization& disc, const DualPoint& p);
double observability_ratio(const MemorySystem& sys, const DualPoint& p,
                           const TimeGrid& grid);

} // namespace memoctrl
