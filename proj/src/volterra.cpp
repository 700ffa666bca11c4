#include "memoctrl/volterra.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace memoctrl {

namespace {

constexpr double kGridMatchTol = 1e-12;
constexpr double kNodeMatchTol = 1e-9;

bool times_match(double a, double b) {
  return std::abs(a - b) <= kGridMatchTol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Kernel samples at the node offsets i*dt. The convolution loop consumes the
// samples in descending-offset order, so they are stored that way: block p of
// cat_pair is K((N-p) dt) + K((N-p+1) dt), which is exactly the combined
// trapezoidal weight of history node j in the two convolution sums (at t_k
// and t_{k+1}) once p = N - k + j. When every coefficient matrix of the
// kernel is a multiple of one matrix W the same sums collapse to scalar
// weights followed by a single multiply by W.
struct KernelCache {
  bool zero = true;
  bool scalar = false;
  int d = 0;
  Eigen::MatrixXd K0;

  Eigen::VectorXd prof_desc; // prof_desc(p) = m((N-p) dt)
  Eigen::VectorXd prof_pair; // prof_pair(p) = prof_desc(p) + prof_desc(p-1)
  double prof_fix_last = 0;  // m(0)/2 + m(dt)
  Eigen::MatrixXd W;

  Eigen::MatrixXd cat_pair;            // d x (N+1)d
  std::vector<Eigen::MatrixXd> nodes;  // K(i dt), ascending
  Eigen::MatrixXd fix_last;            // K(0)/2 + K(dt)
};

KernelCache build_kernel_cache(const ExpPolyKernel& k, const TimeGrid& grid) {
  KernelCache cache;
  cache.d = k.dim();
  cache.K0 = Eigen::MatrixXd::Zero(k.dim(), k.dim());
  if (k.is_zero()) return cache;
  cache.zero = false;

  const int N = grid.steps;
  const double h = grid.dt();

  if (auto factor = common_matrix_factor(k)) {
    cache.scalar = true;
    const ExpPolyKernel& prof = factor->first;
    cache.W = factor->second;
    cache.prof_desc.resize(N + 1);
    for (int p = 0; p <= N; ++p) cache.prof_desc(p) = prof.eval((N - p) * h)(0, 0);
    cache.prof_pair = Eigen::VectorXd::Zero(N + 1);
    for (int p = 1; p <= N; ++p)
      cache.prof_pair(p) = cache.prof_desc(p) + cache.prof_desc(p - 1);
    cache.prof_fix_last = 0.5 * cache.prof_desc(N) + cache.prof_desc(N - 1);
    cache.K0 = cache.prof_desc(N) * cache.W;
    return cache;
  }

  const int d = cache.d;
  cache.nodes.resize(N + 1);
  for (int i = 0; i <= N; ++i) cache.nodes[i] = k.eval(i * h);
  cache.cat_pair = Eigen::MatrixXd::Zero(d, (N + 1) * d);
  for (int p = 1; p <= N; ++p)
    cache.cat_pair.middleCols(p * d, d) = cache.nodes[N - p] + cache.nodes[N - p + 1];
  cache.fix_last = 0.5 * cache.nodes[0] + cache.nodes[1];
  cache.K0 = cache.nodes[0];
  return cache;
}

// Combined history convolution c(t_k) + c_known(t_{k+1}) at step k -> k+1,
// both by trapezoidal quadrature; the unknown y_{k+1} contribution lives in
// the step matrix instead.
Eigen::VectorXd convolution_sum(const KernelCache& K, const Eigen::MatrixXd& Y, int k,
                                double h) {
  const int d = static_cast<int>(Y.rows());
  const int N = static_cast<int>(Y.cols()) - 1;
  if (K.zero) return Eigen::VectorXd::Zero(d);

  if (k == 0) {
    if (K.scalar) return (0.5 * h * K.prof_desc(N - 1)) * (K.W * Y.col(0));
    return 0.5 * h * (K.nodes[1] * Y.col(0));
  }

  if (K.scalar) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    if (k >= 2)
      acc.noalias() = Y.middleCols(1, k - 1) * K.prof_pair.segment(N - k + 1, k - 1);
    acc.noalias() += (0.5 * K.prof_pair(N - k)) * Y.col(0);
    acc.noalias() += K.prof_fix_last * Y.col(k);
    return h * (K.W * acc);
  }

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  if (k >= 2) {
    Eigen::Map<const Eigen::VectorXd> hist(Y.data() + d, (k - 1) * d);
    acc.noalias() = K.cat_pair.middleCols((N - k + 1) * d, (k - 1) * d) * hist;
  }
  acc.noalias() += 0.5 * (K.cat_pair.middleCols((N - k) * d, d) * Y.col(0));
  acc.noalias() += K.fix_last * Y.col(k);
  return h * acc;
}

// Forcing samples for the adjoint source Mtilde(tau)^T z_T.
struct SourceCache {
  bool zero = true;
  bool scalar = false;
  Eigen::VectorXd prof; // ascending node samples of the scalar profile
  Eigen::MatrixXd W;    // transposed factor
  std::vector<Eigen::MatrixXd> nodes;
};

SourceCache build_source_cache(const ExpPolyKernel& mtilde_T, const TimeGrid& grid) {
  SourceCache cache;
  if (mtilde_T.is_zero()) return cache;
  cache.zero = false;
  const int N = grid.steps;
  const double h = grid.dt();
  if (auto factor = common_matrix_factor(mtilde_T)) {
    cache.scalar = true;
    cache.W = factor->second;
    cache.prof.resize(N + 1);
    for (int j = 0; j <= N; ++j) cache.prof(j) = factor->first.eval(j * h)(0, 0);
    return cache;
  }
  cache.nodes.resize(N + 1);
  for (int j = 0; j <= N; ++j) cache.nodes[j] = mtilde_T.eval(j * h);
  return cache;
}

Eigen::MatrixXd step_matrix(const Eigen::MatrixXd& A, const KernelCache& K, double h) {
  const int d = static_cast<int>(A.rows());
  return Eigen::MatrixXd::Identity(d, d) - (h / 2.0) * A - (h * h / 4.0) * K.K0;
}

Eigen::MatrixXd run_steps(const Eigen::MatrixXd& A, const KernelCache& K,
                          const Eigen::FullPivLU<Eigen::MatrixXd>& lu,
                          const Eigen::MatrixXd* forcing, const Eigen::VectorXd& y0,
                          const TimeGrid& grid) {
  const int d = static_cast<int>(A.rows());
  const int N = grid.steps;
  const double h = grid.dt();

  Eigen::MatrixXd Y(d, N + 1);
  Y.col(0) = y0;
  Eigen::VectorXd rhs(d);
  for (int k = 0; k < N; ++k) {
    rhs = Y.col(k) + (h / 2.0) * (A * Y.col(k)) + (h / 2.0) * convolution_sum(K, Y, k, h);
    if (forcing != nullptr) rhs += (h / 2.0) * (forcing->col(k) + forcing->col(k + 1));
    Y.col(k + 1) = lu.solve(rhs);
    if (!Y.col(k + 1).allFinite())
      throw SolverError("non-finite state in time stepping", k + 1);
  }
  return Y;
}

} // namespace

TimeGrid::TimeGrid(double T_, int steps_) : T(T_), steps(steps_) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("grid horizon must be positive");
  if (steps < 2) throw std::invalid_argument("grid needs at least 2 steps");
}

bool TimeGrid::same_as(const TimeGrid& other) const {
  return steps == other.steps && times_match(T, other.T);
}

Trajectory::Trajectory(TimeGrid grid_, Eigen::MatrixXd values_)
    : grid(grid_), values(std::move(values_)) {
  if (values.rows() < 1 || values.cols() != grid.steps + 1)
    throw std::invalid_argument("trajectory shape does not match its grid");
}

ControlInjector::ControlInjector(Eigen::MatrixXd constant)
    : constant_(std::move(constant)) {
  rows_ = static_cast<int>(constant_->rows());
  cols_ = static_cast<int>(constant_->cols());
  if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("B must be non-empty");
}

ControlInjector::ControlInjector(std::function<Eigen::MatrixXd(double)> fn, int rows, int cols)
    : fn_(std::move(fn)), rows_(rows), cols_(cols) {
  if (!fn_) throw std::invalid_argument("B callback must be callable");
  if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("B must be non-empty");
}

const Eigen::MatrixXd& ControlInjector::constant() const {
  if (!constant_) throw std::logic_error("B is not constant");
  return *constant_;
}

Eigen::MatrixXd ControlInjector::operator()(double t) const {
  if (constant_) return *constant_;
  Eigen::MatrixXd B = fn_(t);
  if (B.rows() != rows_ || B.cols() != cols_)
    throw std::invalid_argument("B callback returned wrong dimensions");
  return B;
}

MemorySystem::MemorySystem(Eigen::MatrixXd A_, ExpPolyKernel M_, ExpPolyKernel Mtilde_,
                           ControlInjector B_, double T_)
    : A(std::move(A_)), M(std::move(M_)), Mtilde(std::move(Mtilde_)),
      B(std::move(B_)), T(T_) {
  if (A.rows() != A.cols() || A.rows() < 1)
    throw std::invalid_argument("A must be square and non-empty");
  const int dim = n();
  if (M.dim() != dim || Mtilde.dim() != dim)
    throw std::invalid_argument("kernel dimension does not match A");
  if (B.rows() != dim) throw std::invalid_argument("B row count does not match A");
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("system horizon must be positive");
}

struct Discretization::Impl {
  MemorySystem sys;
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> B_nodes;
  KernelCache M_fwd;
  KernelCache M_adj;
  SourceCache src_adj;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_fwd;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_adj;

  Impl(const MemorySystem& s, const TimeGrid& g) : sys(s), grid(g) {
    if (!times_match(grid.T, sys.T))
      throw std::invalid_argument("grid horizon differs from system horizon");

    B_nodes.resize(grid.steps + 1);
    for (int k = 0; k <= grid.steps; ++k) B_nodes[k] = sys.B(grid.node(k));

    M_fwd = build_kernel_cache(sys.M, grid);
    M_adj = build_kernel_cache(transpose(sys.M), grid);
    src_adj = build_source_cache(transpose(sys.Mtilde), grid);

    const Eigen::MatrixXd S_fwd = step_matrix(sys.A, M_fwd, grid.dt());
    lu_fwd.compute(S_fwd);
    if (!lu_fwd.isInvertible())
      throw SolverError("singular time-step matrix", 1);
    const Eigen::MatrixXd S_adj = step_matrix(sys.A.transpose(), M_adj, grid.dt());
    lu_adj.compute(S_adj);
    if (!lu_adj.isInvertible())
      throw SolverError("singular time-step matrix (adjoint)", 1);
  }
};

Discretization::Discretization(const MemorySystem& sys, const TimeGrid& grid)
    : impl_(std::make_unique<Impl>(sys, grid)) {}
Discretization::~Discretization() = default;

const TimeGrid& Discretization::grid() const { return impl_->grid; }
const MemorySystem& Discretization::system() const { return impl_->sys; }
const Eigen::MatrixXd& Discretization::B_at(int k) const { return impl_->B_nodes.at(k); }

Trajectory Discretization::forward(const Eigen::VectorXd& y0, const Trajectory* u) const {
  const auto& im = *impl_;
  const int n = im.sys.n();
  if (y0.size() != n) throw std::invalid_argument("y0 dimension mismatch");

  Eigen::MatrixXd forcing;
  const Eigen::MatrixXd* fptr = nullptr;
  if (u != nullptr) {
    if (!u->grid.same_as(im.grid)) throw std::invalid_argument("control grid mismatch");
    if (u->dim() != im.sys.m()) throw std::invalid_argument("control dimension mismatch");
    forcing.resize(n, im.grid.steps + 1);
    for (int k = 0; k <= im.grid.steps; ++k)
      forcing.col(k).noalias() = im.B_nodes[k] * u->values.col(k);
    fptr = &forcing;
  }
  return Trajectory(im.grid, run_steps(im.sys.A, im.M_fwd, im.lu_fwd, fptr, y0, im.grid));
}

Trajectory Discretization::adjoint(const Eigen::VectorXd& w_T,
                                   const Eigen::VectorXd& z_T) const {
  const auto& im = *impl_;
  const int n = im.sys.n();
  if (w_T.size() != n || z_T.size() != n)
    throw std::invalid_argument("adjoint data dimension mismatch");

  const int N = im.grid.steps;
  Eigen::MatrixXd forcing;
  const Eigen::MatrixXd* fptr = nullptr;
  if (!im.src_adj.zero) {
    forcing.resize(n, N + 1);
    if (im.src_adj.scalar) {
      const Eigen::VectorXd base = im.src_adj.W * z_T;
      for (int j = 0; j <= N; ++j) forcing.col(j).noalias() = -im.src_adj.prof(j) * base;
    } else {
      for (int j = 0; j <= N; ++j) forcing.col(j).noalias() = -(im.src_adj.nodes[j] * z_T);
    }
    fptr = &forcing;
  }

  Eigen::MatrixXd V =
      run_steps(im.sys.A.transpose(), im.M_adj, im.lu_adj, fptr, w_T, im.grid);
  Eigen::MatrixXd W(n, N + 1);
  for (int k = 0; k <= N; ++k) W.col(k) = V.col(N - k);
  return Trajectory(im.grid, std::move(W));
}

Trajectory solve_forward(const MemorySystem& sys, const Eigen::VectorXd& y0,
                         const Trajectory& u, const TimeGrid& grid) {
  return Discretization(sys, grid).forward(y0, &u);
}

Trajectory solve_forward(const MemorySystem& sys, const Eigen::VectorXd& y0,
                         const TimeGrid& grid) {
  return Discretization(sys, grid).forward(y0, nullptr);
}

Trajectory solve_adjoint(const MemorySystem& sys, const Eigen::VectorXd& w_T,
                         const Eigen::VectorXd& z_T, const TimeGrid& grid) {
  return Discretization(sys, grid).adjoint(w_T, z_T);
}

Eigen::VectorXd memory_functional(const ExpPolyKernel& kernel, const Trajectory& y,
                                  double at) {
  if (kernel.dim() != y.dim())
    throw std::invalid_argument("memory kernel dimension mismatch");
  const double h = y.grid.dt();
  const long k = std::lround(at / h);
  if (k < 0 || k > y.grid.steps ||
      std::abs(y.grid.node(static_cast<int>(k)) - at) > kNodeMatchTol * std::max(1.0, y.grid.T))
    throw std::invalid_argument("evaluation time is not a grid node");

  const int K = static_cast<int>(k);
  const int d = y.dim();
  if (K == 0 || kernel.is_zero()) return Eigen::VectorXd::Zero(d);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (int j = 0; j <= K; ++j) {
    const double w = (j == 0 || j == K) ? 0.5 : 1.0;
    acc.noalias() += w * (kernel.eval((K - j) * h) * y.values.col(j));
  }
  return h * acc;
}

Eigen::VectorXd memory_functional(const ExpPolyKernel& kernel, const Trajectory& y) {
  return memory_functional(kernel, y, y.grid.T);
}

Trajectory memory_trajectory(const ExpPolyKernel& kernel, const Trajectory& y) {
  if (kernel.dim() != y.dim())
    throw std::invalid_argument("memory kernel dimension mismatch");
  const int N = y.grid.steps;
  const int d = y.dim();
  const double h = y.grid.dt();

  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d, N + 1);
  if (!kernel.is_zero()) {
    std::vector<Eigen::MatrixXd> nodes(N + 1);
    for (int i = 0; i <= N; ++i) nodes[i] = kernel.eval(i * h);
    for (int K = 1; K <= N; ++K) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int j = 0; j <= K; ++j) {
        const double w = (j == 0 || j == K) ? 0.5 : 1.0;
        acc.noalias() += w * (nodes[K - j] * y.values.col(j));
      }
      Z.col(K) = h * acc;
    }
  }
  return Trajectory(y.grid, std::move(Z));
}

double trapezoid(const TimeGrid& grid, const Eigen::VectorXd& samples) {
  if (samples.size() != grid.steps + 1)
    throw std::invalid_argument("sample count does not match grid");
  const double interior = samples.segment(1, grid.steps - 1).sum();
  return grid.dt() * (0.5 * samples(0) + interior + 0.5 * samples(grid.steps));
}

} // namespace memoctrl
