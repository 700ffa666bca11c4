#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace memoctrl {

// One exponential-polynomial term e^{a t} * (C_0 + C_1 t + ... + C_K t^K)
// with square matrix coefficients.
struct KernelTerm {
  double exponent = 0.0;
  std::vector<Eigen::MatrixXd> coeffs; // index = polynomial degree
};

// Matrix-valued kernel M(t) = sum_j e^{a_j t} P_j(t). This family is closed
// under differentiation, addition and right matrix multiplication, which is
// what the rank recursions need. Instances are kept canonical: terms sorted
// by exponent, exponents within a relative tolerance merged, trailing
// numerically-zero coefficients trimmed, empty terms dropped.
class ExpPolyKernel {
public:
  static constexpr double kExponentMergeTol = 1e-12;
  static constexpr double kZeroTrimTol = 1e-14;

  ExpPolyKernel() : dim_(0) {}
  ExpPolyKernel(int dim, std::vector<KernelTerm> terms);

  // Zero kernel of the given dimension (no terms).
  static ExpPolyKernel zero(int dim);
  // Constant kernel t -> C.
  static ExpPolyKernel constant(const Eigen::MatrixXd& C);
  // 1x1 kernel e^{a t} * (c_0 + c_1 t + ...).
  static ExpPolyKernel scalar(double exponent, const std::vector<double>& coeffs);

  int dim() const { return dim_; }
  const std::vector<KernelTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // True when the kernel does not depend on t (constant or zero).
  bool is_constant() const;
  // Total number of scalar coefficient entries across all terms.
  int coefficient_count() const;

  Eigen::MatrixXd eval(double t) const;
  Eigen::MatrixXd operator()(double t) const { return eval(t); }

private:
  void canonicalize();

  int dim_;
  std::vector<KernelTerm> terms_;
};

// d/dt of the kernel: e^{a t} sum C_k t^k maps to
// e^{a t} sum (a C_k + (k+1) C_{k+1}) t^k.
ExpPolyKernel differentiate(const ExpPolyKernel& k);

// Order-th derivative evaluated at t = 0 (exact within the family).
Eigen::MatrixXd derivative_at_zero(const ExpPolyKernel& k, int order);

// t -> M(t) * X for square X of matching dimension.
ExpPolyKernel right_multiply(const ExpPolyKernel& k, const Eigen::MatrixXd& X);

// Pointwise sum of two kernels of equal dimension.
ExpPolyKernel add(const ExpPolyKernel& a, const ExpPolyKernel& b);

// Pointwise scalar multiple.
ExpPolyKernel scale(const ExpPolyKernel& k, double s);

// t -> M(t)^T.
ExpPolyKernel transpose(const ExpPolyKernel& k);

// Expands a 1x1 kernel m(t) to m(t) * W.
ExpPolyKernel expand_scalar(const ExpPolyKernel& scalar_kernel, const Eigen::MatrixXd& W);

// If every coefficient matrix is a scalar multiple of one common matrix W,
// returns the 1x1 profile kernel m(t) and W such that M(t) = m(t) * W.
// Returns nullopt for the zero kernel or when no common factor exists.
std::optional<std::pair<ExpPolyKernel, Eigen::MatrixXd>>
common_matrix_factor(const ExpPolyKernel& k);

// Structural comparison after canonicalization (entrywise within tol).
bool approx_equal(const ExpPolyKernel& a, const ExpPolyKernel& b, double tol);

// Least-squares G of  M(0) * G = (d^order M / dt^order)(0),  the shift matrix
// behind the derivative-based rank test. Returns the minimum-norm solution,
// or nullopt when the residual exceeds tol * (1 + |rhs|_F) (no consistent G
// exists).
std::optional<Eigen::MatrixXd> solve_G(const ExpPolyKernel& mtilde, int order,
                                       double tol = 1e-10);

} // namespace memoctrl
