#pragma once

#include "memoctrl/errors.hpp"
#include "memoctrl/kernels.hpp"
#include "memoctrl/volterra.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace memoctrl {

enum class RankCondition { I, II, III };
enum class Verdict { Holds, Fails, Inconclusive };

std::string to_string(RankCondition c);
std::string to_string(Verdict v);

// State of the controllability recursion
//   A_{i+1} = A A_i + M_i(0),
//   M_{i+1}(.) = M(.) A_i + M_i'(.),
//   Mtilde_{i+1}(.) = Mtilde(.) A_i + Mtilde_i'(.),
// started from A_1 = A, M_1 = M, Mtilde_1 = Mtilde. For constant kernels the
// derivative terms vanish and the recursion reduces to A_{i+1} = A A_i + M_i,
// M_{i+1} = M A_i.
struct RecursionState {
  int index = 1;
  Eigen::MatrixXd A_i;
  ExpPolyKernel M_i;
  ExpPolyKernel Mtilde_i;
};

RecursionState initial_state(const MemorySystem& sys);
RecursionState recursion_step(const RecursionState& state, const MemorySystem& sys);

struct RankResult {
  int rank = 0;
  Eigen::VectorXd singular_values;
};

// Rank by SVD: count of singular values above tol * sigma_max * max(rows, cols).
RankResult numerical_rank(const Eigen::MatrixXd& Mx, double tol = 1e-12);

struct RankReport {
  RankCondition condition = RankCondition::I;
  Verdict verdict = Verdict::Inconclusive;
  int rank = 0;
  int target = 0;       // always 2n
  int blocks_used = 0;  // appended block columns (matrix cols / m)
  Eigen::MatrixXd matrix;
  std::string stop_reason; // rank_reached | krylov_closure | max_blocks | fixed_truncation
  Eigen::VectorXd singular_values;
  std::optional<bool> necessary_too; // condition iii with invertible Mtilde only
};

// Three sufficient rank tests for driving both the terminal state and the
// accumulated memory to zero; each assembles a 2n-row block matrix and asks
// for full row rank 2n.
//
// Column blocks:
//   i:   [B; 0], then [A_i B; Mtilde_i(0) B] for i = 1, 2, ...
//   ii:  [B; 0], [A_1 B; B], then [A_i B; F_{i-1} B] with
//        F_i = A_i + G_1 A_{i-1} + ... + G_{i-1} A_1 + G_i and G_i the shift
//        matrices from solve_G (throws InapplicableError when no G_i exists).
//   iii: constant kernels only; the fixed truncation
//        [B, A_1 B, ..., A_{2n+1} B; 0, B, A_1 B, ..., A_{2n} B].
//
// Conditions i and ii have no a-priori column bound. The recursion is a fixed
// linear map on the finite-dimensional space of (A_i, M_i, Mtilde_i) (kernels
// never leave the span of the starting exponents and degrees), and every
// block is a linear image of that state, so once the state enters the span of
// its predecessors no further block can grow the column space: verdict fails.
// max_blocks (0 = automatic cap, see default_max_blocks) guards against the
// orthonormalization never triggering; hitting it yields inconclusive.
//
// Both require a constant B.
RankReport check_condition_i(const MemorySystem& sys, double tol = 1e-12,
                             int max_blocks = 0);
RankReport check_condition_ii(const MemorySystem& sys, double tol = 1e-12,
                              int max_blocks = 0);
RankReport check_condition_iii(const MemorySystem& sys, double tol = 1e-12);

// Fixed-width assemblies of the same matrices, for diagnostics: `blocks`
// column blocks, no stopping logic.
Eigen::MatrixXd condition_i_matrix(const MemorySystem& sys, int blocks);
Eigen::MatrixXd condition_ii_matrix(const MemorySystem& sys, int blocks);
Eigen::MatrixXd condition_iii_matrix(const MemorySystem& sys);

// F_1 .. F_count per the formula above; throws InapplicableError when some
// G_i does not exist.
std::vector<Eigen::MatrixXd> compute_F_sequence(const MemorySystem& sys, int count);

// Safety cap on appended blocks: twice the recursion state dimension plus
// two, where the state dimension counts n^2 entries of A_i plus every scalar
// coefficient entry of both kernels.
int default_max_blocks(const MemorySystem& sys);

} // namespace memoctrl
