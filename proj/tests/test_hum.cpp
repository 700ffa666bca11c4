#include "memoctrl/hum.hpp"
#include "memoctrl/rank.hpp"
#include "memoctrl/volterra.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

using namespace memoctrl;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937& rng, int rows, int cols, double amp) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = dist(rng);
  return M;
}

MemorySystem scalar_sys(const ExpPolyKernel& Mt) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  return MemorySystem(Eigen::MatrixXd::Zero(1, 1), ExpPolyKernel::zero(1), Mt,
                      ControlInjector(one), 1.0);
}

// A = 0, M = 0, Mtilde = 1, B = 1, T = 1: the two-constraint scalar problem
// whose optimal control is u(t) = 6t - 4.
MemorySystem oracle_sys() { return scalar_sys(ExpPolyKernel::scalar(0.0, {1.0})); }

// Same but without the memory target: optimal control u = -1.
MemorySystem classical_sys() { return scalar_sys(ExpPolyKernel::zero(1)); }

double dot_pair(const std::pair<Eigen::VectorXd, Eigen::VectorXd>& a, const DualPoint& p) {
  return a.first.dot(p.w_T) + a.second.dot(p.z_T);
}

} // namespace

TEST_CASE("objective oracle values") {
  const TimeGrid grid(1.0, 1000);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);

  // Zero data costs nothing.
  CHECK(objective(oracle_sys(), one, DualPoint{zero, zero}, grid) == doctest::Approx(0.0));

  // w == 1: J = 1/2 + (w(0), y0) = 1.5.
  CHECK(objective(classical_sys(), one, DualPoint{one, zero}, grid) ==
        doctest::Approx(1.5).epsilon(1e-9));

  // w(t) = t - 1 from pure memory data: J = 1/2 int (t-1)^2 = 1/6.
  CHECK(objective(oracle_sys(), zero, DualPoint{zero, one}, grid) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-6));
}

TEST_CASE("gradient oracle values") {
  const TimeGrid grid(1.0, 1000);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);

  // p = 0: u = 0, y stays at y0 = 1, memory integrates to 1.
  const auto g = objective_gradient(oracle_sys(), one, DualPoint{zero, zero}, grid);
  CHECK(g.first(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.second(0) == doctest::Approx(-1.0).epsilon(1e-6));

  // Zero state and zero data: both components vanish.
  const auto g0 = objective_gradient(oracle_sys(), zero, DualPoint{zero, zero}, grid);
  CHECK(g0.first.norm() == 0.0);
  CHECK(g0.second.norm() == 0.0);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937 rng(6001);
  const double fd_step = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const Eigen::MatrixXd A = random_matrix(rng, n, n, 1.0);
    KernelTerm mt;
    mt.exponent = -0.5;
    mt.coeffs = {random_matrix(rng, n, n, 1.0)};
    KernelTerm tt;
    tt.exponent = 0.3;
    tt.coeffs = {random_matrix(rng, n, n, 1.0)};
    const MemorySystem sys(A, ExpPolyKernel(n, {mt}), ExpPolyKernel(n, {tt}),
                           ControlInjector(random_matrix(rng, n, m, 1.0)), 1.0);
    const TimeGrid grid(1.0, 1000);
    const Discretization disc(sys, grid);
    const Eigen::VectorXd y0 = random_matrix(rng, n, 1, 1.0);
    const DualPoint p{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};

    const auto grad = objective_gradient(disc, y0, p);
    Eigen::VectorXd flat(2 * n);
    flat << grad.first, grad.second;

    Eigen::VectorXd fd(2 * n);
    for (int i = 0; i < 2 * n; ++i) {
      DualPoint hi = p, lo = p;
      (i < n ? hi.w_T(i) : hi.z_T(i - n)) += fd_step;
      (i < n ? lo.w_T(i) : lo.z_T(i - n)) -= fd_step;
      fd(i) = (objective(disc, y0, hi) - objective(disc, y0, lo)) / (2.0 * fd_step);
    }
    CHECK((flat - fd).norm() / std::max(1.0, flat.norm()) < 1e-4);
  }
}

TEST_CASE("gramian vanishes at zero and is exactly symmetric without memory") {
  std::mt19937 rng(6002);
  const TimeGrid grid(1.0, 1000);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + trial % 3;
    const Eigen::MatrixXd A = random_matrix(rng, n, n, 1.0);
    // M = 0 keeps the discrete pairing self-adjoint to machine precision;
    // the memory-target kernel may be anything constant.
    const MemorySystem sys(A, ExpPolyKernel::zero(n),
                           ExpPolyKernel::constant(random_matrix(rng, n, n, 1.0)),
                           ControlInjector(random_matrix(rng, n, 2, 1.0)), 1.0);
    const Discretization disc(sys, grid);

    const auto zero = gramian_apply(
        disc, DualPoint{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)});
    CHECK(zero.first.norm() == 0.0);
    CHECK(zero.second.norm() == 0.0);

    const DualPoint p{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};
    const DualPoint q{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};
    const double pq = dot_pair(gramian_apply(disc, p), q);
    const double qp = dot_pair(gramian_apply(disc, q), p);
    CHECK(std::abs(pq - qp) / (std::abs(pq) + std::abs(qp) + 1.0) < 1e-8);
  }
}

TEST_CASE("gramian symmetry for convolution kernels converges quadratically") {
  std::mt19937 rng(6003);
  const int n = 2;
  const Eigen::MatrixXd A = random_matrix(rng, n, n, 1.0);
  KernelTerm mt;
  mt.exponent = -0.8;
  mt.coeffs = {random_matrix(rng, n, n, 1.0)};
  KernelTerm tt;
  tt.exponent = 0.5;
  tt.coeffs = {random_matrix(rng, n, n, 1.0), random_matrix(rng, n, n, 1.0)};
  const MemorySystem sys(A, ExpPolyKernel(n, {mt}), ExpPolyKernel(n, {tt}),
                         ControlInjector(random_matrix(rng, n, 2, 1.0)), 1.0);
  const DualPoint p{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};
  const DualPoint q{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};

  auto defect = [&](int steps) {
    const Discretization disc(sys, TimeGrid(1.0, steps));
    const double pq = dot_pair(gramian_apply(disc, p), q);
    const double qp = dot_pair(gramian_apply(disc, q), p);
    return std::abs(pq - qp) / (std::abs(pq) + std::abs(qp) + 1.0);
  };
  const double coarse = defect(1000);
  const double fine = defect(4000);
  CHECK(fine < 1e-7);
  // Quadratic decay of the asymmetry under 4x refinement.
  CHECK(coarse / fine > 8.0);
}

TEST_CASE("gramian quadratic form equals twice the homogeneous objective") {
  std::mt19937 rng(6004);
  // With zero drift the adjoint is constant, both sides are trapezoid sums of
  // the same node values and the identity is exact.
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 1 + trial % 3;
    const MemorySystem sys(Eigen::MatrixXd::Zero(n, n), ExpPolyKernel::zero(n),
                           ExpPolyKernel::zero(n),
                           ControlInjector(random_matrix(rng, n, 2, 1.0)), 1.0);
    const Discretization disc(sys, TimeGrid(1.0, 500));
    const DualPoint p{random_matrix(rng, n, 1, 1.0), random_matrix(rng, n, 1, 1.0)};
    const double pp = dot_pair(gramian_apply(disc, p), p);
    const double twoJ = 2.0 * objective(disc, Eigen::VectorXd::Zero(n), p);
    CHECK(std::abs(pp - twoJ) / (std::abs(twoJ) + 1.0) < 1e-12);
    CHECK(pp >= 0.0);
  }

  // A nonzero drift introduces a quadrature defect, second order in dt.
  {
    std::mt19937 rng2(6104);
    const int n = 2;
    const MemorySystem sys(random_matrix(rng2, n, n, 1.0), ExpPolyKernel::zero(n),
                           ExpPolyKernel::zero(n),
                           ControlInjector(random_matrix(rng2, n, 2, 1.0)), 1.0);
    const DualPoint p{random_matrix(rng2, n, 1, 1.0), random_matrix(rng2, n, 1, 1.0)};
    auto defect = [&](int steps) {
      const Discretization disc(sys, TimeGrid(1.0, steps));
      const double pp = dot_pair(gramian_apply(disc, p), p);
      const double twoJ = 2.0 * objective(disc, Eigen::VectorXd::Zero(n), p);
      return std::abs(pp - twoJ);
    };
    CHECK(defect(250) / defect(1000) > 6.0);
    CHECK(defect(250) / defect(1000) < 50.0);
    CHECK(defect(4000) < 5e-8);
  }

  // Same with a memory target on the scalar oracle system.
  auto defect = [&](int steps) {
    const Discretization disc(oracle_sys(), TimeGrid(1.0, steps));
    DualPoint p{Eigen::VectorXd::Ones(1) * 0.7, Eigen::VectorXd::Ones(1) * (-1.3)};
    const double pp = dot_pair(gramian_apply(disc, p), p);
    const double twoJ = 2.0 * objective(disc, Eigen::VectorXd::Zero(1), p);
    return std::abs(pp - twoJ);
  };
  const double coarse = defect(1000);
  const double fine = defect(10000);
  CHECK(fine < 1e-8);
  CHECK(coarse / fine > 50.0);
  CHECK(coarse / fine < 200.0);
}

TEST_CASE("synthesis solves the classical scalar problem") {
  const TimeGrid grid(1.0, 1000);
  const SynthesisResult res =
      synthesize(classical_sys(), Eigen::VectorXd::Ones(1), grid, 1e-10);
  CHECK(res.converged);
  CHECK(res.terminal_state_norm < 1e-6);
  CHECK(res.memory_norm == 0.0); // no memory target at all
  CHECK(res.cost == doctest::Approx(1.0).epsilon(1e-3));
  for (int k = 0; k <= grid.steps; k += 100)
    CHECK(std::abs(res.control.at(k)(0) + 1.0) < 1e-3);
}

TEST_CASE("synthesis recovers the two-constraint optimal control") {
  const TimeGrid grid(1.0, 1000);
  const SynthesisResult res = synthesize(oracle_sys(), Eigen::VectorXd::Ones(1), grid, 1e-10);
  CHECK(res.converged);
  CHECK(res.terminal_state_norm < 1e-6);
  CHECK(res.memory_norm < 1e-6);
  CHECK(res.cost == doctest::Approx(4.0).epsilon(0.01));
  double sup = 0.0;
  for (int k = 0; k <= grid.steps; ++k)
    sup = std::max(sup, std::abs(res.control.at(k)(0) - (6.0 * grid.node(k) - 4.0)));
  CHECK(sup < 1e-2);
  CHECK(res.epsilon == 1e-10);
  if (res.converged && !res.residual_history.empty())
    CHECK(res.residual_history.back() <= 1e-10);
}

TEST_CASE("zero initial state needs no control") {
  const TimeGrid grid(1.0, 100);
  const SynthesisResult res = synthesize(oracle_sys(), Eigen::VectorXd::Zero(1), grid, 1e-8);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.terminal_state_norm == 0.0);
  CHECK(res.memory_norm == 0.0);
  CHECK(res.cost == 0.0);
  CHECK(res.control.values.norm() == 0.0);
}

TEST_CASE("residuals do not grow as the penalty shrinks") {
  const TimeGrid grid(1.0, 1000);
  double prev_state = -1.0, prev_mem = -1.0;
  for (double eps : {1e-4, 1e-6, 1e-8}) {
    const SynthesisResult res = synthesize(oracle_sys(), Eigen::VectorXd::Ones(1), grid, eps);
    CHECK(res.converged);
    if (prev_state >= 0.0) {
      CHECK(res.terminal_state_norm <= prev_state + 1e-12);
      CHECK(res.memory_norm <= prev_mem + 1e-12);
    }
    prev_state = res.terminal_state_norm;
    prev_mem = res.memory_norm;
  }
}

TEST_CASE("synthesis validates its parameters") {
  const TimeGrid grid(1.0, 100);
  CHECK_THROWS_AS(synthesize(oracle_sys(), Eigen::VectorXd::Ones(1), grid, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(synthesize(oracle_sys(), Eigen::VectorXd::Ones(1), grid, -1e-8),
                  std::invalid_argument);
  CHECK_THROWS_AS(synthesize(oracle_sys(), Eigen::VectorXd::Ones(1), grid, 1e-8, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(synthesize(oracle_sys(), Eigen::VectorXd::Ones(2), grid, 1e-8),
                  std::invalid_argument);
}

TEST_CASE("favourable rank verdicts come with small synthesis residuals") {
  // Full-rank injectors keep the control Gramian well conditioned, so the
  // favourable algebraic verdict translates into small penalized residuals.
  // (A verdict alone does not bound the Gramian conditioning: narrow
  // injectors can hold algebraically yet leave the penalty term dominant.)
  std::mt19937 rng(6005);
  const TimeGrid grid(1.0, 400);
  int holds_checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const Eigen::MatrixXd A = random_matrix(rng, n, n, 1.0);
    const Eigen::MatrixXd M = random_matrix(rng, n, n, 1.0);
    const Eigen::MatrixXd Mt =
        random_matrix(rng, n, n, 0.5) + 2.0 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd B = random_matrix(rng, n, n, 0.3) +
                              Eigen::MatrixXd::Identity(n, n);
    const MemorySystem sys(A, ExpPolyKernel::constant(M), ExpPolyKernel::constant(Mt),
                           ControlInjector(B), 1.0);
    if (check_condition_iii(sys).verdict != Verdict::Holds) continue;
    ++holds_checked;
    const Eigen::VectorXd y0 = random_matrix(rng, n, 1, 1.0);
    const SynthesisResult res = synthesize(sys, y0, grid, 1e-9, 1e-12, 300);
    const double scale = std::max(1e-9, y0.norm());
    CHECK(res.terminal_state_norm <= 1e-4 * scale);
    CHECK(res.memory_norm <= 1e-4 * scale);
  }
  CHECK(holds_checked == 10);
}

TEST_CASE("unreachable directions leave large residuals") {
  // Diagonal dynamics with control on the first coordinate only: the second
  // coordinate is invisible to the control, the rank test fails, and the
  // synthesis stagnates.
  std::mt19937 rng(6006);
  const TimeGrid grid(1.0, 400);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2;
    std::uniform_real_distribution<double> pos(0.2, 1.5);
    Eigen::VectorXd adiag(n), mdiag(n), tdiag(n);
    for (int i = 0; i < n; ++i) {
      adiag(i) = pos(rng);
      mdiag(i) = 0.5 * pos(rng);
      tdiag(i) = pos(rng);
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, 1);
    B(0, 0) = 1.0;
    const MemorySystem sys(adiag.asDiagonal(),
                           ExpPolyKernel::constant(mdiag.asDiagonal()),
                           ExpPolyKernel::constant(tdiag.asDiagonal()),
                           ControlInjector(B), 1.0);
    const RankReport rep = check_condition_iii(sys);
    REQUIRE(rep.verdict == Verdict::Fails);
    REQUIRE(rep.necessary_too.has_value());
    CHECK(*rep.necessary_too);

    const Eigen::VectorXd y0 = Eigen::VectorXd::Ones(n);
    const SynthesisResult res = synthesize(sys, y0, grid, 1e-9, 1e-12, 300);
    CHECK(res.terminal_state_norm + res.memory_norm >= 1e-2 * y0.norm());
  }
}

TEST_CASE("observability ratio oracle and scaling") {
  // w == 1 on [0, 2]: |w(0)|^2 = 1, int |w|^2 = 2.
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const MemorySystem sys(Eigen::MatrixXd::Zero(1, 1), ExpPolyKernel::zero(1),
                         ExpPolyKernel::zero(1), ControlInjector(one), 2.0);
  const TimeGrid grid(2.0, 500);
  const DualPoint p{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
  const double base = observability_ratio(sys, p, grid);
  CHECK(base == doctest::Approx(0.5).epsilon(1e-13));

  // Power-of-two scalings are exact in floating point.
  for (double alpha : {2.0, 0.25}) {
    const DualPoint q{alpha * p.w_T, alpha * p.z_T};
    CHECK(observability_ratio(sys, q, grid) == base);
  }
  const DualPoint r{3.0 * p.w_T, 3.0 * p.z_T};
  CHECK(std::abs(observability_ratio(sys, r, grid) - base) < 1e-13);

  CHECK_THROWS_AS(
      observability_ratio(sys, DualPoint{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}, grid),
      std::invalid_argument);
}

TEST_CASE("invisible adjoint data reports an infinite ratio") {
  const MemorySystem sys(Eigen::MatrixXd::Zero(1, 1), ExpPolyKernel::zero(1),
                         ExpPolyKernel::zero(1),
                         ControlInjector(Eigen::MatrixXd::Zero(1, 1)), 1.0);
  const TimeGrid grid(1.0, 100);
  const DualPoint p{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
  CHECK(std::isinf(observability_ratio(sys, p, grid)));
}
