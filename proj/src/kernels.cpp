#include "memoctrl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace memoctrl {

namespace {

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

bool exponents_close(double a, double b) {
  return std::abs(a - b) <=
         ExpPolyKernel::kExponentMergeTol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

} // namespace

ExpPolyKernel::ExpPolyKernel(int dim, std::vector<KernelTerm> terms)
    : dim_(dim), terms_(std::move(terms)) {
  if (dim_ <= 0) throw std::invalid_argument("kernel dimension must be positive");
  for (const auto& term : terms_) {
    if (!std::isfinite(term.exponent))
      throw std::invalid_argument("kernel exponent must be finite");
    for (const auto& C : term.coeffs)
      if (C.rows() != dim_ || C.cols() != dim_)
        throw std::invalid_argument("kernel coefficient dimension mismatch");
  }
  canonicalize();
}

ExpPolyKernel ExpPolyKernel::zero(int dim) { return ExpPolyKernel(dim, {}); }

ExpPolyKernel ExpPolyKernel::constant(const Eigen::MatrixXd& C) {
  if (C.rows() != C.cols() || C.rows() == 0)
    throw std::invalid_argument("constant kernel needs a square matrix");
  return ExpPolyKernel(static_cast<int>(C.rows()), {KernelTerm{0.0, {C}}});
}

ExpPolyKernel ExpPolyKernel::scalar(double exponent, const std::vector<double>& coeffs) {
  KernelTerm term;
  term.exponent = exponent;
  for (double c : coeffs) term.coeffs.push_back(Eigen::MatrixXd::Constant(1, 1, c));
  return ExpPolyKernel(1, {std::move(term)});
}

bool ExpPolyKernel::is_constant() const {
  if (terms_.empty()) return true;
  return terms_.size() == 1 && terms_[0].exponent == 0.0 && terms_[0].coeffs.size() == 1;
}

int ExpPolyKernel::coefficient_count() const {
  int count = 0;
  for (const auto& term : terms_)
    count += static_cast<int>(term.coeffs.size()) * dim_ * dim_;
  return count;
}

Eigen::MatrixXd ExpPolyKernel::eval(double t) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& term : terms_) {
    // Horner on the polynomial part.
    Eigen::MatrixXd p = term.coeffs.back();
    for (int k = static_cast<int>(term.coeffs.size()) - 2; k >= 0; --k)
      p = term.coeffs[k] + t * p;
    out += std::exp(term.exponent * t) * p;
  }
  return out;
}

void ExpPolyKernel::canonicalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const KernelTerm& a, const KernelTerm& b) { return a.exponent < b.exponent; });

  std::vector<KernelTerm> merged;
  for (auto& term : terms_) {
    if (!merged.empty() && exponents_close(merged.back().exponent, term.exponent)) {
      auto& dst = merged.back().coeffs;
      if (term.coeffs.size() > dst.size())
        dst.resize(term.coeffs.size(), Eigen::MatrixXd::Zero(dim_, dim_));
      for (size_t k = 0; k < term.coeffs.size(); ++k) dst[k] += term.coeffs[k];
    } else {
      merged.push_back(std::move(term));
    }
  }

  terms_.clear();
  for (auto& term : merged) {
    while (!term.coeffs.empty() && max_abs(term.coeffs.back()) <= kZeroTrimTol)
      term.coeffs.pop_back();
    if (!term.coeffs.empty()) terms_.push_back(std::move(term));
  }
}

ExpPolyKernel differentiate(const ExpPolyKernel& k) {
  std::vector<KernelTerm> out;
  for (const auto& term : k.terms()) {
    KernelTerm d;
    d.exponent = term.exponent;
    const int K = static_cast<int>(term.coeffs.size()) - 1;
    d.coeffs.resize(K + 1);
    for (int i = 0; i <= K; ++i) {
      d.coeffs[i] = term.exponent * term.coeffs[i];
      if (i + 1 <= K) d.coeffs[i] += double(i + 1) * term.coeffs[i + 1];
    }
    out.push_back(std::move(d));
  }
  return ExpPolyKernel(k.dim(), std::move(out));
}

Eigen::MatrixXd derivative_at_zero(const ExpPolyKernel& k, int order) {
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  ExpPolyKernel d = k;
  for (int i = 0; i < order; ++i) d = differentiate(d);
  return d.eval(0.0);
}

ExpPolyKernel right_multiply(const ExpPolyKernel& k, const Eigen::MatrixXd& X) {
  if (X.rows() != k.dim() || X.cols() != k.dim())
    throw std::invalid_argument("right_multiply dimension mismatch");
  std::vector<KernelTerm> out;
  for (const auto& term : k.terms()) {
    KernelTerm t;
    t.exponent = term.exponent;
    for (const auto& C : term.coeffs) t.coeffs.push_back(C * X);
    out.push_back(std::move(t));
  }
  return ExpPolyKernel(k.dim(), std::move(out));
}

ExpPolyKernel add(const ExpPolyKernel& a, const ExpPolyKernel& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("kernel sum dimension mismatch");
  std::vector<KernelTerm> out = a.terms();
  out.insert(out.end(), b.terms().begin(), b.terms().end());
  return ExpPolyKernel(a.dim(), std::move(out));
}

ExpPolyKernel scale(const ExpPolyKernel& k, double s) {
  std::vector<KernelTerm> out;
  for (const auto& term : k.terms()) {
    KernelTerm t;
    t.exponent = term.exponent;
    for (const auto& C : term.coeffs) t.coeffs.push_back(s * C);
    out.push_back(std::move(t));
  }
  return ExpPolyKernel(k.dim(), std::move(out));
}

ExpPolyKernel transpose(const ExpPolyKernel& k) {
  std::vector<KernelTerm> out;
  for (const auto& term : k.terms()) {
    KernelTerm t;
    t.exponent = term.exponent;
    for (const auto& C : term.coeffs) t.coeffs.push_back(C.transpose());
    out.push_back(std::move(t));
  }
  return ExpPolyKernel(k.dim(), std::move(out));
}

ExpPolyKernel expand_scalar(const ExpPolyKernel& scalar_kernel, const Eigen::MatrixXd& W) {
  if (scalar_kernel.dim() != 1)
    throw std::invalid_argument("expand_scalar needs a 1x1 kernel");
  if (W.rows() != W.cols() || W.rows() == 0)
    throw std::invalid_argument("expand_scalar needs a square matrix");
  std::vector<KernelTerm> out;
  for (const auto& term : scalar_kernel.terms()) {
    KernelTerm t;
    t.exponent = term.exponent;
    for (const auto& C : term.coeffs) t.coeffs.push_back(C(0, 0) * W);
    out.push_back(std::move(t));
  }
  return ExpPolyKernel(static_cast<int>(W.rows()), std::move(out));
}

std::optional<std::pair<ExpPolyKernel, Eigen::MatrixXd>>
common_matrix_factor(const ExpPolyKernel& k) {
  if (k.is_zero()) return std::nullopt;

  const Eigen::MatrixXd* base = nullptr;
  for (const auto& term : k.terms())
    for (const auto& C : term.coeffs)
      if (base == nullptr && max_abs(C) > 0.0) base = &C;
  if (base == nullptr) return std::nullopt;

  const Eigen::MatrixXd& W = *base;
  const double wnorm2 = W.squaredNorm();
  std::vector<KernelTerm> profile;
  for (const auto& term : k.terms()) {
    KernelTerm t;
    t.exponent = term.exponent;
    for (const auto& C : term.coeffs) {
      const double alpha = (C.array() * W.array()).sum() / wnorm2;
      if (max_abs(C - alpha * W) > 1e-14 * std::max(1.0, max_abs(C)))
        return std::nullopt;
      t.coeffs.push_back(Eigen::MatrixXd::Constant(1, 1, alpha));
    }
    profile.push_back(std::move(t));
  }
  return std::make_pair(ExpPolyKernel(1, std::move(profile)), W);
}

bool approx_equal(const ExpPolyKernel& a, const ExpPolyKernel& b, double tol) {
  if (a.dim() != b.dim()) return false;
  if (a.terms().size() != b.terms().size()) return false;
  for (size_t j = 0; j < a.terms().size(); ++j) {
    const auto& ta = a.terms()[j];
    const auto& tb = b.terms()[j];
    if (!exponents_close(ta.exponent, tb.exponent) &&
        std::abs(ta.exponent - tb.exponent) > tol)
      return false;
    const size_t deg = std::max(ta.coeffs.size(), tb.coeffs.size());
    for (size_t k = 0; k < deg; ++k) {
      Eigen::MatrixXd ca = k < ta.coeffs.size() ? ta.coeffs[k]
                                                : Eigen::MatrixXd::Zero(a.dim(), a.dim());
      Eigen::MatrixXd cb = k < tb.coeffs.size() ? tb.coeffs[k]
                                                : Eigen::MatrixXd::Zero(b.dim(), b.dim());
      if (max_abs(ca - cb) > tol) return false;
    }
  }
  return true;
}

std::optional<Eigen::MatrixXd> solve_G(const ExpPolyKernel& mtilde, int order, double tol) {
  if (order < 1) throw std::invalid_argument("solve_G order must be >= 1");
  const Eigen::MatrixXd M0 = mtilde.eval(0.0);
  const Eigen::MatrixXd rhs = derivative_at_zero(mtilde, order);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M0);
  Eigen::MatrixXd G = cod.solve(rhs);
  const double residual = (M0 * G - rhs).norm();
  if (residual > tol * (1.0 + rhs.norm())) return std::nullopt;
  return G;
}

} // namespace memoctrl
