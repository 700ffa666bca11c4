#include "memoctrl/errors.hpp"
#include "memoctrl/rank.hpp"

#include <doctest.h>

#include <Eigen/Dense>

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

MemorySystem constant_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M,
                             const Eigen::MatrixXd& Mt, const Eigen::MatrixXd& B) {
  return MemorySystem(A, ExpPolyKernel::constant(M), ExpPolyKernel::constant(Mt),
                      ControlInjector(B), 1.0);
}

MemorySystem scalar_fib() {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  return constant_system(one, one, one, one);
}

} // namespace

TEST_CASE("recursion generates the Fibonacci pattern") {
  const MemorySystem sys = scalar_fib();
  RecursionState s = initial_state(sys);
  CHECK(s.index == 1);
  CHECK(s.A_i(0, 0) == doctest::Approx(1.0));
  const double expect_A[] = {1, 2, 3, 5, 8};
  const double expect_M[] = {1, 1, 2, 3, 5};
  for (int i = 0; i < 5; ++i) {
    CHECK(s.A_i(0, 0) == doctest::Approx(expect_A[i]));
    CHECK(s.M_i.eval(0.0)(0, 0) == doctest::Approx(expect_M[i]));
    s = recursion_step(s, sys);
  }
}

TEST_CASE("recursion collapses to matrix powers without memory") {
  std::mt19937 rng(5001);
  const Eigen::MatrixXd A = random_matrix(rng, 3, 3, 1.0);
  const MemorySystem sys = constant_system(A, Eigen::MatrixXd::Zero(3, 3),
                                           Eigen::MatrixXd::Zero(3, 3),
                                           Eigen::MatrixXd::Identity(3, 3));
  RecursionState s = initial_state(sys);
  Eigen::MatrixXd power = A;
  for (int i = 1; i <= 4; ++i) {
    CHECK((s.A_i - power).norm() < 1e-12 * power.norm());
    CHECK(s.M_i.is_zero());
    CHECK(s.Mtilde_i.is_zero());
    s = recursion_step(s, sys);
    power = A * power;
  }
}

TEST_CASE("recursion with zero drift alternates memory and state") {
  // A = 0, M constant C: A_2 = C, M_2 = 0, A_3 = 0, M_3 = C^2.
  std::mt19937 rng(5002);
  const Eigen::MatrixXd C = random_matrix(rng, 2, 2, 1.0);
  const MemorySystem sys = constant_system(Eigen::MatrixXd::Zero(2, 2), C,
                                           Eigen::MatrixXd::Identity(2, 2),
                                           Eigen::MatrixXd::Identity(2, 2));
  const RecursionState s2 = recursion_step(initial_state(sys), sys);
  CHECK((s2.A_i - C).norm() < 1e-14);
  CHECK(s2.M_i.is_zero());
  const RecursionState s3 = recursion_step(s2, sys);
  CHECK(s3.A_i.norm() < 1e-14);
  CHECK((s3.M_i.eval(0.0) - C * C).norm() < 1e-14);
}

TEST_CASE("numerical rank thresholds relative to the largest singular value") {
  CHECK(numerical_rank(Eigen::MatrixXd::Zero(3, 4)).rank == 0);
  CHECK(numerical_rank(Eigen::MatrixXd::Identity(3, 3)).rank == 3);
  Eigen::MatrixXd nearly(2, 2);
  nearly << 1.0, 1.0, 1.0, 1.0 + 1e-14;
  const RankResult r = numerical_rank(nearly);
  CHECK(r.rank == 1);
  REQUIRE(r.singular_values.size() == 2);
  CHECK(r.singular_values(0) >= r.singular_values(1));
}

TEST_CASE("condition iii on the Fibonacci system") {
  const RankReport rep = check_condition_iii(scalar_fib());
  CHECK(rep.verdict == Verdict::Holds);
  CHECK(rep.rank == 2);
  CHECK(rep.target == 2);
  CHECK(rep.blocks_used == 4);
  CHECK(rep.stop_reason == "fixed_truncation");
  REQUIRE(rep.matrix.rows() == 2);
  REQUIRE(rep.matrix.cols() == 4);
  Eigen::MatrixXd expected(2, 4);
  expected << 1, 1, 2, 3, 0, 1, 1, 2;
  CHECK((rep.matrix - expected).norm() < 1e-14);
  REQUIRE(rep.necessary_too.has_value());
  CHECK(*rep.necessary_too);
}

TEST_CASE("condition iii without dynamics reduces to the injector") {
  // A = 0, M = 0, Mtilde = 1: matrix [1 0 0 0; 0 1 0 0].
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  const RankReport rep = check_condition_iii(constant_system(zero, zero, one, one));
  CHECK(rep.verdict == Verdict::Holds);
  Eigen::MatrixXd expected(2, 4);
  expected << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK((rep.matrix - expected).norm() < 1e-14);

  // A = 0 with a full-rank injector holds; a deficient one fails.
  const Eigen::MatrixXd Z2 = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK(check_condition_iii(constant_system(Z2, Z2, I2, I2)).verdict == Verdict::Holds);
  Eigen::MatrixXd b(2, 1);
  b << 1, 0;
  CHECK(check_condition_iii(constant_system(Z2, Z2, I2, b)).verdict == Verdict::Fails);
}

TEST_CASE("zero injector fails every condition") {
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const MemorySystem sys = constant_system(I2, I2, I2, Eigen::MatrixXd::Zero(2, 1));
  for (const RankReport& rep :
       {check_condition_i(sys), check_condition_ii(sys), check_condition_iii(sys)}) {
    CHECK(rep.verdict == Verdict::Fails);
    CHECK(rep.rank == 0);
  }
}

TEST_CASE("rank-two system with a single control column fails") {
  // n = 2, A = 0, M = 0, Mtilde = I, B = (1,0)^T: no recursion ever produces
  // a second direction.
  const Eigen::MatrixXd Z2 = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd b(2, 1);
  b << 1, 0;
  const MemorySystem sys = constant_system(Z2, Z2, I2, b);

  const RankReport ri = check_condition_i(sys);
  CHECK(ri.verdict == Verdict::Fails);
  CHECK(ri.rank == 2);
  CHECK(ri.stop_reason == "krylov_closure");

  const RankReport rii = check_condition_ii(sys);
  CHECK(rii.verdict == Verdict::Fails);
  CHECK(rii.rank == 2);

  const RankReport riii = check_condition_iii(sys);
  CHECK(riii.verdict == Verdict::Fails);
  CHECK(riii.rank == 2);
}

TEST_CASE("condition i on the Fibonacci system stops at rank") {
  const RankReport rep = check_condition_i(scalar_fib());
  CHECK(rep.verdict == Verdict::Holds);
  CHECK(rep.rank == 2);
  CHECK(rep.blocks_used == 2);
  CHECK(rep.stop_reason == "rank_reached");
}

TEST_CASE("condition i closes immediately on a dead recursion") {
  // A = 0, M = 0, Mtilde = 0: the recursion state is identically zero, so no
  // block beyond [B; 0] can ever appear.
  const Eigen::MatrixXd Z2 = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd b(2, 1);
  b << 1, 0;
  const MemorySystem sys(Z2, ExpPolyKernel::zero(2), ExpPolyKernel::zero(2),
                         ControlInjector(b), 1.0);
  const RankReport rep = check_condition_i(sys);
  CHECK(rep.verdict == Verdict::Fails);
  CHECK(rep.rank == 1);
  CHECK(rep.stop_reason == "krylov_closure");
}

TEST_CASE("condition ii with an exponential memory-target kernel") {
  // A = 0, M = 0, Mtilde(t) = e^t, B = 1: blocks [1;0], [0;1] give rank 2.
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  const MemorySystem sys(zero, ExpPolyKernel::zero(1), ExpPolyKernel::scalar(1.0, {1.0}),
                         ControlInjector(one), 1.0);
  const RankReport rep = check_condition_ii(sys);
  CHECK(rep.verdict == Verdict::Holds);
  CHECK(rep.rank == 2);
  CHECK(rep.blocks_used == 2);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 0, 0, 1;
  CHECK((rep.matrix - expected).norm() < 1e-14);
}

TEST_CASE("condition ii needs a consistent shift factorization") {
  // Mtilde(0) = diag(1,0) with Mtilde'(0) = e_21: no G_1 exists, and the
  // single-column injector forces the test to reach for F_1.
  KernelTerm term;
  term.exponent = 0.0;
  Eigen::MatrixXd C0 = Eigen::MatrixXd::Zero(2, 2);
  C0(0, 0) = 1.0;
  Eigen::MatrixXd C1 = Eigen::MatrixXd::Zero(2, 2);
  C1(1, 0) = 1.0;
  term.coeffs = {C0, C1};
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  Eigen::MatrixXd b(2, 1);
  b << 1, 0;
  const MemorySystem sys(A, ExpPolyKernel::zero(2), ExpPolyKernel(2, {term}),
                         ControlInjector(b), 1.0);
  CHECK_THROWS_AS(check_condition_ii(sys), InapplicableError);
}

TEST_CASE("constant kernels specialize the shifted recursion to plain powers") {
  // For constant kernels every G_i is zero, so F_i = A_i and the condition ii
  // matrix coincides with the condition iii one.
  std::mt19937 rng(5003);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 3;
    const MemorySystem sys = constant_system(
        random_matrix(rng, n, n, 2.0), random_matrix(rng, n, n, 2.0),
        random_matrix(rng, n, n, 2.0), random_matrix(rng, n, 1, 2.0));
    const std::vector<Eigen::MatrixXd> F = compute_F_sequence(sys, 4);
    RecursionState s = initial_state(sys);
    for (int i = 0; i < 4; ++i) {
      CHECK((F[i] - s.A_i).norm() < 1e-10 * (1.0 + s.A_i.norm()));
      s = recursion_step(s, sys);
    }
    CHECK((condition_ii_matrix(sys, 2 * n + 2) - condition_iii_matrix(sys)).norm() <
          1e-10);
  }
}

TEST_CASE("the three conditions agree on constant kernels with invertible targets") {
  std::mt19937 rng(5004);
  int holds_seen = 0;
  int fails_seen = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool decoupled = trial % 4 == 3;
    const int n = decoupled ? 2 + trial % 2 : 1 + trial % 3;
    const int m = 1 + (trial / 3) % n;
    Eigen::MatrixXd A, M, Mt, B;
    if (decoupled) {
      // Diagonal dynamics driven through one coordinate leave the others
      // unreachable: a guaranteed fails case with invertible Mtilde.
      A = random_matrix(rng, n, 1, 2.0).asDiagonal();
      M = random_matrix(rng, n, 1, 2.0).asDiagonal();
      Mt = (random_matrix(rng, n, 1, 1.0) + Eigen::MatrixXd::Constant(n, 1, 3.0))
               .asDiagonal();
      B = Eigen::MatrixXd::Zero(n, 1);
      B(0, 0) = 1.0;
    } else {
      A = random_matrix(rng, n, n, 2.0);
      M = random_matrix(rng, n, n, 2.0);
      // Diagonal boost keeps Mtilde comfortably invertible.
      Mt = random_matrix(rng, n, n, 1.0) + 3.0 * Eigen::MatrixXd::Identity(n, n);
      B = random_matrix(rng, n, m, 2.0);
    }
    const MemorySystem sys = constant_system(A, M, Mt, B);

    const RankReport ri = check_condition_i(sys);
    const RankReport rii = check_condition_ii(sys);
    const RankReport riii = check_condition_iii(sys);
    CHECK(ri.verdict == riii.verdict);
    CHECK(rii.verdict == riii.verdict);
    CHECK(riii.verdict != Verdict::Inconclusive);
    for (const RankReport* rep : {&ri, &rii, &riii})
      CHECK((rep->verdict == Verdict::Holds) == (rep->rank == rep->target));
    REQUIRE(riii.necessary_too.has_value());
    CHECK(*riii.necessary_too);
    (riii.verdict == Verdict::Holds ? holds_seen : fails_seen) += 1;
  }
  // The sample exercises both outcomes.
  CHECK(holds_seen > 0);
  CHECK(fails_seen > 0);
}

TEST_CASE("stopping early never hides rank growth") {
  // After the span of recursion states closes, appending more blocks cannot
  // increase the rank.
  std::mt19937 rng(5005);
  int closures = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 2;
    // Diagonal systems with a single-coordinate injector always close the
    // span before reaching full rank.
    const Eigen::MatrixXd A = random_matrix(rng, n, 1, 2.0).asDiagonal();
    const Eigen::MatrixXd M = random_matrix(rng, n, 1, 2.0).asDiagonal();
    const Eigen::MatrixXd Mt = random_matrix(rng, n, 1, 2.0).asDiagonal();
    Eigen::MatrixXd b(n, 1);
    b.setZero();
    b(0, 0) = 1.0;
    const MemorySystem sys = constant_system(A, M, Mt, b);

    const RankReport ri = check_condition_i(sys);
    if (ri.stop_reason == "krylov_closure") {
      ++closures;
      const Eigen::MatrixXd wider = condition_i_matrix(sys, ri.blocks_used + 5);
      CHECK(numerical_rank(wider).rank == ri.rank);
    }
    const RankReport rii = check_condition_ii(sys);
    if (rii.stop_reason == "krylov_closure") {
      const Eigen::MatrixXd wider = condition_ii_matrix(sys, rii.blocks_used + 5);
      CHECK(numerical_rank(wider).rank == rii.rank);
    }
  }
  CHECK(closures > 0);
}

TEST_CASE("exponential kernels keep the closure sound as well") {
  std::mt19937 rng(5006);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 1 + trial % 2;
    const Eigen::MatrixXd A = random_matrix(rng, n, n, 1.0);
    KernelTerm mt;
    mt.exponent = -0.5 + trial * 0.3;
    mt.coeffs = {random_matrix(rng, n, n, 1.0)};
    Eigen::MatrixXd b(n, 1);
    b.setZero();
    b(0, 0) = 1.0;
    const MemorySystem sys(A, ExpPolyKernel::zero(n), ExpPolyKernel(n, {mt}),
                           ControlInjector(b), 1.0);
    const RankReport rep = check_condition_i(sys);
    CHECK(rep.verdict != Verdict::Inconclusive);
    if (rep.stop_reason == "krylov_closure") {
      const Eigen::MatrixXd wider = condition_i_matrix(sys, rep.blocks_used + 5);
      CHECK(numerical_rank(wider).rank == rep.rank);
    }
  }
}

TEST_CASE("rank checks demand a constant injector") {
  const ControlInjector B([](double) { return Eigen::MatrixXd::Identity(2, 2); }, 2, 2);
  const MemorySystem sys(Eigen::MatrixXd::Zero(2, 2), ExpPolyKernel::zero(2),
                         ExpPolyKernel::zero(2), B, 1.0);
  CHECK_THROWS_AS(check_condition_i(sys), std::invalid_argument);
  CHECK_THROWS_AS(check_condition_ii(sys), std::invalid_argument);
  CHECK_THROWS_AS(check_condition_iii(sys), std::invalid_argument);
}

TEST_CASE("condition iii rejects non-constant kernels") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const MemorySystem sys(one, ExpPolyKernel::scalar(1.0, {1.0}), ExpPolyKernel::zero(1),
                         ControlInjector(one), 1.0);
  CHECK_THROWS_AS(check_condition_iii(sys), std::invalid_argument);
}

TEST_CASE("a tight block budget yields inconclusive") {
  Eigen::MatrixXd A(2, 2);
  A << 0, 0, 1, 0;
  Eigen::MatrixXd b(2, 1);
  b << 1, 0;
  const MemorySystem sys = constant_system(A, Eigen::MatrixXd::Zero(2, 2),
                                           Eigen::MatrixXd::Identity(2, 2), b);
  const RankReport rep = check_condition_i(sys, 1e-12, 1);
  CHECK(rep.verdict == Verdict::Inconclusive);
  CHECK(rep.blocks_used == 1);
  CHECK(rep.stop_reason == "max_blocks");
  // The automatic budget settles the same system.
  CHECK(check_condition_i(sys).verdict != Verdict::Inconclusive);
}

TEST_CASE("default block budget counts the recursion state size") {
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const MemorySystem sys = constant_system(I2, I2, I2, I2);
  // n^2 + 4 kernel entries + 4 kernel entries = 12, doubled plus two.
  CHECK(default_max_blocks(sys) == 26);
}

TEST_CASE("labels serialize as expected") {
  CHECK(to_string(RankCondition::I) == "i");
  CHECK(to_string(RankCondition::II) == "ii");
  CHECK(to_string(RankCondition::III) == "iii");
  CHECK(to_string(Verdict::Holds) == "holds");
  CHECK(to_string(Verdict::Fails) == "fails");
  CHECK(to_string(Verdict::Inconclusive) == "inconclusive");
}
