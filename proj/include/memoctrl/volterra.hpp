#pragma once

#include "memoctrl/errors.hpp"
#include "memoctrl/kernels.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace memoctrl {

// Uniform grid on [0, T] with `steps` intervals (steps + 1 nodes).
struct TimeGrid {
  TimeGrid(double T, int steps);
  double T;
  int steps;
  double dt() const { return T / steps; }
  double node(int k) const { return k == steps ? T : T * k / steps; }
  bool same_as(const TimeGrid& other) const;
};

// Node-sampled vector-valued function of time.
struct Trajectory {
  Trajectory(TimeGrid grid, Eigen::MatrixXd values);
  TimeGrid grid;
  Eigen::MatrixXd values; // dim x (steps + 1); column k = value at node k
  int dim() const { return static_cast<int>(values.rows()); }
  Eigen::VectorXd at(int k) const { return values.col(k); }
};

// Control injection operator B(t): a constant n x m matrix or a callback
// sampled at grid nodes.
class ControlInjector {
public:
  ControlInjector(Eigen::MatrixXd constant);
  ControlInjector(std::function<Eigen::MatrixXd(double)> fn, int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_constant() const { return constant_.has_value(); }
  const Eigen::MatrixXd& constant() const; // throws unless is_constant()
  Eigen::MatrixXd operator()(double t) const;

private:
  std::optional<Eigen::MatrixXd> constant_;
  std::function<Eigen::MatrixXd(double)> fn_;
  int rows_ = 0, cols_ = 0;
};

// Linear dynamics with memory on [0, T]:
//
//   y'(t) = A y(t) + int_0^t M(t-s) y(s) ds + B(t) u(t),   y(0) = y0.
//
// Mtilde is the kernel of the memory functional int_0^T Mtilde(T-s) y(s) ds
// that the control problems drive to zero together with y(T).
struct MemorySystem {
  MemorySystem(Eigen::MatrixXd A, ExpPolyKernel M, ExpPolyKernel Mtilde,
               ControlInjector B, double T);

  Eigen::MatrixXd A;
  ExpPolyKernel M;
  ExpPolyKernel Mtilde;
  ControlInjector B;
  double T;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return B.cols(); }
};

// Grid-level precomputation shared by repeated solves on one system: kernel
// values at node offsets, factored step matrices, sampled B. Build once when
// many solves run on the same grid (gramian iterations); the one-shot
// solve_forward / solve_adjoint wrappers below construct it internally.
class Discretization {
public:
  Discretization(const MemorySystem& sys, const TimeGrid& grid);
  ~Discretization();
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const TimeGrid& grid() const;
  const MemorySystem& system() const;
  const Eigen::MatrixXd& B_at(int k) const;

  Trajectory forward(const Eigen::VectorXd& y0, const Trajectory* u) const;
  Trajectory adjoint(const Eigen::VectorXd& w_T, const Eigen::VectorXd& z_T) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Implicit trapezoidal solve of the forward dynamics; the convolution term is
// approximated by trapezoidal quadrature over the stored history and the
// new-node contribution is folded into the per-step linear solve, whose
// matrix  I - (dt/2) A - (dt^2/4) M(0)  is factored once per grid.
Trajectory solve_forward(const MemorySystem& sys, const Eigen::VectorXd& y0,
                         const Trajectory& u, const TimeGrid& grid);
Trajectory solve_forward(const MemorySystem& sys, const Eigen::VectorXd& y0,
                         const TimeGrid& grid); // u = 0

// Adjoint dynamics on [0, T]:
//
//   w'(t) = -A^T w(t) - int_t^T M(s-t)^T w(s) ds + Mtilde(T-t)^T z_T,
//   w(T) = w_T.
//
// Solved by substituting tau = T - t, which yields a forward Volterra system
// handled by the same scheme, then reversing the node order.
Trajectory solve_adjoint(const MemorySystem& sys, const Eigen::VectorXd& w_T,
                         const Eigen::VectorXd& z_T, const TimeGrid& grid);

// Trapezoidal approximation of  int_0^at kernel(at - s) y(s) ds.  `at` must
// coincide with a grid node; the two-argument overload evaluates at T.
Eigen::VectorXd memory_functional(const ExpPolyKernel& kernel, const Trajectory& y,
                                  double at);
Eigen::VectorXd memory_functional(const ExpPolyKernel& kernel, const Trajectory& y);

// The memory functional evaluated at every grid node, as a trajectory.
Trajectory memory_trajectory(const ExpPolyKernel& kernel, const Trajectory& y);

// Trapezoidal quadrature of node samples over the grid.
double trapezoid(const TimeGrid& grid, const Eigen::VectorXd& samples);

} // namespace memoctrl
