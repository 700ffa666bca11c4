#include "memoctrl/rank.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace memoctrl {

namespace {

constexpr double kClosureTol = 1e-10;
constexpr double kSolveGTol = 1e-10;

bool exponents_close(double a, double b) {
  return std::abs(a - b) <=
         ExpPolyKernel::kExponentMergeTol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Fixed coordinate layout for every kernel reachable from a starting kernel
// under the recursion: differentiation and right-multiplication never add
// exponents or raise degrees, so the starting kernel's terms define the slots
// once and for all.
struct KernelTemplate {
  int n = 0;
  std::vector<std::pair<double, int>> slots; // (exponent, coefficient count)
  int entries = 0;

  static KernelTemplate of(const ExpPolyKernel& k) {
    KernelTemplate t;
    t.n = k.dim();
    for (const auto& term : k.terms()) {
      t.slots.emplace_back(term.exponent, static_cast<int>(term.coeffs.size()));
      t.entries += static_cast<int>(term.coeffs.size()) * t.n * t.n;
    }
    return t;
  }

  Eigen::VectorXd vectorize(const ExpPolyKernel& k) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(entries);
    for (const auto& term : k.terms()) {
      int offset = 0;
      bool placed = false;
      for (const auto& [a, count] : slots) {
        if (exponents_close(term.exponent, a)) {
          if (static_cast<int>(term.coeffs.size()) > count)
            throw std::logic_error("kernel degree left its recursion template");
          for (std::size_t d = 0; d < term.coeffs.size(); ++d)
            v.segment(offset + static_cast<int>(d) * n * n, n * n) =
                Eigen::Map<const Eigen::VectorXd>(term.coeffs[d].data(), n * n);
          placed = true;
          break;
        }
        offset += count * n * n;
      }
      if (!placed) throw std::logic_error("kernel exponent left its recursion template");
    }
    return v;
  }

  ExpPolyKernel devectorize(const Eigen::VectorXd& v) const {
    std::vector<KernelTerm> terms;
    int offset = 0;
    for (const auto& [a, count] : slots) {
      KernelTerm term;
      term.exponent = a;
      for (int d = 0; d < count; ++d) {
        term.coeffs.emplace_back(Eigen::Map<const Eigen::MatrixXd>(v.data() + offset, n, n));
        offset += n * n;
      }
      terms.push_back(std::move(term));
    }
    return ExpPolyKernel(n, std::move(terms));
  }
};

// Coordinates for the full recursion state (A_i, M_i, Mtilde_i).
struct StateSpace {
  int n;
  KernelTemplate tm;
  KernelTemplate tmt;

  explicit StateSpace(const MemorySystem& sys)
      : n(sys.n()), tm(KernelTemplate::of(sys.M)), tmt(KernelTemplate::of(sys.Mtilde)) {}

  int dim() const { return n * n + tm.entries + tmt.entries; }

  Eigen::VectorXd vectorize(const RecursionState& s) const {
    Eigen::VectorXd v(dim());
    v.head(n * n) = Eigen::Map<const Eigen::VectorXd>(s.A_i.data(), n * n);
    v.segment(n * n, tm.entries) = tm.vectorize(s.M_i);
    v.tail(tmt.entries) = tmt.vectorize(s.Mtilde_i);
    return v;
  }

  RecursionState devectorize(const Eigen::VectorXd& v, int index) const {
    RecursionState s;
    s.index = index;
    s.A_i = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
    s.M_i = tm.devectorize(v.segment(n * n, tm.entries));
    s.Mtilde_i = tmt.devectorize(v.tail(tmt.entries));
    return s;
  }
};

// Modified Gram-Schmidt span test with a relative residual threshold. A zero
// vector counts as dependent (the orbit of zero stays zero).
class SpanTracker {
public:
  explicit SpanTracker(double tol) : tol_(tol) {}

  bool absorb(const Eigen::VectorXd& v) {
    const double nv = v.norm();
    if (nv == 0.0) return true;
    Eigen::VectorXd r = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis_) r -= q.dot(r) * q;
    if (r.norm() <= tol_ * nv) return true;
    basis_.push_back(r.normalized());
    return false;
  }

private:
  double tol_;
  std::vector<Eigen::VectorXd> basis_;
};

void append_block(Eigen::MatrixXd& mat, const Eigen::MatrixXd& top,
                  const Eigen::MatrixXd& bottom) {
  const Eigen::Index c = mat.cols();
  mat.conservativeResize(Eigen::NoChange, c + top.cols());
  mat.block(0, c, top.rows(), top.cols()) = top;
  mat.block(top.rows(), c, bottom.rows(), bottom.cols()) = bottom;
}

const Eigen::MatrixXd& constant_B(const MemorySystem& sys) {
  if (!sys.B.is_constant())
    throw std::invalid_argument("rank conditions require a constant B");
  return sys.B.constant();
}

void require_constant_kernels(const MemorySystem& sys) {
  if (!sys.M.is_constant() || !sys.Mtilde.is_constant())
    throw std::invalid_argument("this condition requires constant kernels");
}

RankReport finish(RankCondition cond, Verdict v, const char* reason, int blocks,
                  Eigen::MatrixXd mat, const RankResult& rr, int target) {
  RankReport rep;
  rep.condition = cond;
  rep.verdict = v;
  rep.rank = rr.rank;
  rep.target = target;
  rep.blocks_used = blocks;
  rep.matrix = std::move(mat);
  rep.stop_reason = reason;
  rep.singular_values = rr.singular_values;
  return rep;
}

InapplicableError no_shift_matrix(int order) {
  return InapplicableError("no shift matrix G_" + std::to_string(order) +
                           ": Mtilde(0) does not factor the derivative");
}

} // namespace

std::string to_string(RankCondition c) {
  switch (c) {
    case RankCondition::I: return "i";
    case RankCondition::II: return "ii";
    case RankCondition::III: return "iii";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

RecursionState initial_state(const MemorySystem& sys) {
  return RecursionState{1, sys.A, sys.M, sys.Mtilde};
}

RecursionState recursion_step(const RecursionState& state, const MemorySystem& sys) {
  RecursionState next;
  next.index = state.index + 1;
  next.A_i = sys.A * state.A_i + state.M_i.eval(0.0);
  next.M_i = add(right_multiply(sys.M, state.A_i), differentiate(state.M_i));
  next.Mtilde_i = add(right_multiply(sys.Mtilde, state.A_i), differentiate(state.Mtilde_i));
  return next;
}

RankResult numerical_rank(const Eigen::MatrixXd& Mx, double tol) {
  RankResult res;
  if (Mx.size() == 0) {
    res.singular_values.resize(0);
    return res;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Mx);
  res.singular_values = svd.singularValues();
  if (res.singular_values.size() == 0) return res;
  const double thresh = tol * res.singular_values(0) *
                        static_cast<double>(std::max(Mx.rows(), Mx.cols()));
  for (Eigen::Index i = 0; i < res.singular_values.size(); ++i)
    if (res.singular_values(i) > thresh) ++res.rank;
  return res;
}

int default_max_blocks(const MemorySystem& sys) {
  const int n = sys.n();
  return 2 * (n * n + sys.M.coefficient_count() + sys.Mtilde.coefficient_count()) + 2;
}

RankReport check_condition_i(const MemorySystem& sys, double tol, int max_blocks) {
  const Eigen::MatrixXd& B = constant_B(sys);
  const int n = sys.n();
  const int target = 2 * n;
  const Eigen::MatrixXd Zb = Eigen::MatrixXd::Zero(n, B.cols());
  if (max_blocks <= 0) max_blocks = default_max_blocks(sys);

  StateSpace space(sys);
  SpanTracker tracker(kClosureTol);

  Eigen::MatrixXd mat(2 * n, 0);
  append_block(mat, B, Zb);
  int blocks = 1;

  RecursionState s = initial_state(sys);
  while (true) {
    const RankResult rr = numerical_rank(mat, tol);
    if (rr.rank == target)
      return finish(RankCondition::I, Verdict::Holds, "rank_reached", blocks,
                    std::move(mat), rr, target);
    if (tracker.absorb(space.vectorize(s)))
      return finish(RankCondition::I, Verdict::Fails, "krylov_closure", blocks,
                    std::move(mat), rr, target);
    if (blocks >= max_blocks)
      return finish(RankCondition::I, Verdict::Inconclusive, "max_blocks", blocks,
                    std::move(mat), rr, target);
    append_block(mat, s.A_i * B, s.Mtilde_i.eval(0.0) * B);
    ++blocks;
    s = recursion_step(s, sys);
  }
}

RankReport check_condition_ii(const MemorySystem& sys, double tol, int max_blocks) {
  const Eigen::MatrixXd& B = constant_B(sys);
  const int n = sys.n();
  const int target = 2 * n;
  const Eigen::MatrixXd Zb = Eigen::MatrixXd::Zero(n, B.cols());
  if (max_blocks <= 0) max_blocks = default_max_blocks(sys);

  StateSpace space(sys);
  const int ds = space.dim();
  const int dg = space.tmt.entries;

  std::vector<Eigen::MatrixXd> A_seq;
  std::vector<Eigen::MatrixXd> G_seq;
  auto F_of = [&](int i) {
    while (static_cast<int>(G_seq.size()) < i) {
      const int order = static_cast<int>(G_seq.size()) + 1;
      auto G = solve_G(sys.Mtilde, order, kSolveGTol);
      if (!G) throw no_shift_matrix(order);
      G_seq.push_back(std::move(*G));
    }
    Eigen::MatrixXd F = A_seq[i - 1] + G_seq[i - 1];
    for (int l = 1; l <= i - 1; ++l) F += G_seq[l - 1] * A_seq[i - l - 1];
    return F;
  };

  RecursionState s1 = initial_state(sys);
  const Eigen::VectorXd s1v = space.vectorize(s1);
  A_seq.push_back(s1.A_i);

  Eigen::MatrixXd mat(2 * n, 0);
  append_block(mat, B, Zb);
  RecursionState s = recursion_step(s1, sys);
  A_seq.push_back(s.A_i);
  append_block(mat, A_seq[0] * B, B);
  int blocks = 2;

  // Joint Markov state behind the blocks for j >= 2: the block [A_j B;
  // F_{j-1} B] is a linear image of (s_j, s_{j-1}, g_{j-1}, W_{j-1}) with
  // g_l the vectorized l-th derivative of Mtilde and W_l the tensor
  // accumulator sum_{p<l} g_p s_{l-p}^T, all of which advance by a fixed
  // linear map (s -> Phi s, g -> g', W -> W Phi^T + g s_1^T). Closure of this
  // state therefore makes later blocks redundant. A constant Mtilde has
  // g = 0 forever, so the g and W components are dropped then.
  ExpPolyKernel g_ker = differentiate(sys.Mtilde);
  Eigen::VectorXd g_vec = space.tmt.vectorize(g_ker);
  const bool track_tensor = g_vec.norm() > 0.0;
  Eigen::MatrixXd Phi;
  if (track_tensor) {
    Phi.resize(ds, ds);
    for (int c = 0; c < ds; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(ds);
      e(c) = 1.0;
      Phi.col(c) = space.vectorize(recursion_step(space.devectorize(e, 1), sys));
    }
  }
  Eigen::MatrixXd W =
      Eigen::MatrixXd::Zero(track_tensor ? dg : 0, track_tensor ? ds : 0);
  Eigen::VectorXd s_prev_v = s1v;

  SpanTracker tracker(kClosureTol);
  int j = 2;
  while (true) {
    const RankResult rr = numerical_rank(mat, tol);
    if (rr.rank == target)
      return finish(RankCondition::II, Verdict::Holds, "rank_reached", blocks,
                    std::move(mat), rr, target);

    Eigen::VectorXd sv = space.vectorize(s);
    Eigen::VectorXd zeta(2 * ds + (track_tensor ? dg + dg * ds : 0));
    zeta.head(ds) = sv;
    zeta.segment(ds, ds) = s_prev_v;
    if (track_tensor) {
      zeta.segment(2 * ds, dg) = g_vec;
      zeta.tail(dg * ds) = Eigen::Map<const Eigen::VectorXd>(W.data(), dg * ds);
    }
    if (tracker.absorb(zeta))
      return finish(RankCondition::II, Verdict::Fails, "krylov_closure", blocks,
                    std::move(mat), rr, target);
    if (blocks >= max_blocks)
      return finish(RankCondition::II, Verdict::Inconclusive, "max_blocks", blocks,
                    std::move(mat), rr, target);

    append_block(mat, s.A_i * B, F_of(j - 1) * B);
    ++blocks;

    if (track_tensor) {
      W = (W * Phi.transpose()).eval();
      W.noalias() += g_vec * s1v.transpose();
      g_ker = differentiate(g_ker);
      g_vec = space.tmt.vectorize(g_ker);
    }
    s_prev_v = std::move(sv);
    s = recursion_step(s, sys);
    A_seq.push_back(s.A_i);
    ++j;
  }
}

RankReport check_condition_iii(const MemorySystem& sys, double tol) {
  require_constant_kernels(sys);
  const int n = sys.n();
  const int target = 2 * n;

  Eigen::MatrixXd mat = condition_iii_matrix(sys);
  const RankResult rr = numerical_rank(mat, tol);
  RankReport rep = finish(RankCondition::III,
                          rr.rank == target ? Verdict::Holds : Verdict::Fails,
                          "fixed_truncation", 2 * n + 2, std::move(mat), rr, target);
  rep.necessary_too = numerical_rank(sys.Mtilde.eval(0.0), tol).rank == n;
  return rep;
}

Eigen::MatrixXd condition_i_matrix(const MemorySystem& sys, int blocks) {
  if (blocks < 1) throw std::invalid_argument("need at least one block");
  const Eigen::MatrixXd& B = constant_B(sys);
  const int n = sys.n();
  Eigen::MatrixXd mat(2 * n, 0);
  append_block(mat, B, Eigen::MatrixXd::Zero(n, B.cols()));
  RecursionState s = initial_state(sys);
  for (int j = 1; j < blocks; ++j) {
    append_block(mat, s.A_i * B, s.Mtilde_i.eval(0.0) * B);
    s = recursion_step(s, sys);
  }
  return mat;
}

Eigen::MatrixXd condition_ii_matrix(const MemorySystem& sys, int blocks) {
  if (blocks < 1) throw std::invalid_argument("need at least one block");
  const Eigen::MatrixXd& B = constant_B(sys);
  const int n = sys.n();
  Eigen::MatrixXd mat(2 * n, 0);
  append_block(mat, B, Eigen::MatrixXd::Zero(n, B.cols()));
  if (blocks == 1) return mat;

  std::vector<Eigen::MatrixXd> A_seq;
  RecursionState s = initial_state(sys);
  for (int i = 1; i < blocks; ++i) {
    A_seq.push_back(s.A_i);
    s = recursion_step(s, sys);
  }
  append_block(mat, A_seq[0] * B, B);
  if (blocks == 2) return mat;

  const std::vector<Eigen::MatrixXd> F = compute_F_sequence(sys, blocks - 2);
  for (int j = 2; j < blocks; ++j) append_block(mat, A_seq[j - 1] * B, F[j - 2] * B);
  return mat;
}

Eigen::MatrixXd condition_iii_matrix(const MemorySystem& sys) {
  require_constant_kernels(sys);
  const Eigen::MatrixXd& B = constant_B(sys);
  const int n = sys.n();

  std::vector<Eigen::MatrixXd> A_seq;
  RecursionState s = initial_state(sys);
  for (int i = 1; i <= 2 * n + 1; ++i) {
    A_seq.push_back(s.A_i);
    s = recursion_step(s, sys);
  }

  Eigen::MatrixXd mat(2 * n, 0);
  append_block(mat, B, Eigen::MatrixXd::Zero(n, B.cols()));
  append_block(mat, A_seq[0] * B, B);
  for (int j = 2; j <= 2 * n + 1; ++j) append_block(mat, A_seq[j - 1] * B, A_seq[j - 2] * B);
  return mat;
}

std::vector<Eigen::MatrixXd> compute_F_sequence(const MemorySystem& sys, int count) {
  if (count < 1) return {};
  std::vector<Eigen::MatrixXd> A_seq;
  RecursionState s = initial_state(sys);
  for (int i = 0; i < count; ++i) {
    A_seq.push_back(s.A_i);
    s = recursion_step(s, sys);
  }
  std::vector<Eigen::MatrixXd> G_seq;
  for (int order = 1; order <= count; ++order) {
    auto G = solve_G(sys.Mtilde, order, kSolveGTol);
    if (!G) throw no_shift_matrix(order);
    G_seq.push_back(std::move(*G));
  }
  std::vector<Eigen::MatrixXd> F;
  for (int i = 1; i <= count; ++i) {
    Eigen::MatrixXd Fi = A_seq[i - 1] + G_seq[i - 1];
    for (int l = 1; l <= i - 1; ++l) Fi += G_seq[l - 1] * A_seq[i - l - 1];
    F.push_back(std::move(Fi));
  }
  return F;
}

} // namespace memoctrl
