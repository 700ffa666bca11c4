#pragma once

#include "memoctrl/volterra.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace memoctrl {

// Uniform 1-D mesh on (0, L) with homogeneous Dirichlet ends eliminated:
// interior nodes x_i = (i+1) h, h = L / (N+1), i = 0 .. N-1.
struct Mesh1D {
  Mesh1D(double L, int N);
  double L;
  int N;
  double h() const { return L / (N + 1); }
  double node(int i) const { return (i + 1) * h(); }
};

// Second-order central-difference Laplacian on the interior nodes:
// tridiagonal, diagonal -2/h^2, off-diagonals 1/h^2.
Eigen::MatrixXd discretize_laplacian(const Mesh1D& mesh);

// Control support (c(t) - r, c(t) + r) swept linearly from c0 to c1 over the
// horizon.
struct MovingWindow {
  double c0 = 0;
  double c1 = 0;
  double r = 0;

  double center(double t, double T) const { return c0 + (c1 - c0) * (t / T); }
  bool contains(double x, double t, double T) const {
    const double c = center(t, T);
    return x > c - r && x < c + r;
  }
};

// Node-sharp indicator injector B(t) = diag(chi_window(x_i)), an N x N 0/1
// diagonal matrix. Construction fails when the window misses every mesh node
// on a time subinterval of positive length (no control authority there).
ControlInjector moving_support_injector(const MovingWindow& win, const Mesh1D& mesh,
                                        double T);

struct CoverageReport {
  bool covered = false;
  std::vector<std::pair<double, double>> uncovered; // subintervals of [0, L]
};

// Whether the swept window covers the whole domain,
// [min(c0,c1) - r, max(c0,c1) + r] contains [0, L]; the uncovered remainder
// is reported otherwise.
CoverageReport coverage_check(const MovingWindow& win, const Mesh1D& mesh, double T);

enum class MemoryVariant { StateMemory, LaplacianMemory };
std::string to_string(MemoryVariant v);

// Semidiscretized heat equation with memory under the moving control window:
// A is the mesh Laplacian, M(.) = m(.) I (state memory) or m(.) A (Laplacian
// memory), Mtilde(.) = mtilde(.) I, B the moving injector. m and mtilde are
// 1x1 profile kernels. A sweep that fails coverage_check is allowed (fixed-
// window demonstrations are intentional) and only logged.
MemorySystem assemble_system(const Mesh1D& mesh, const MovingWindow& win,
                             const ExpPolyKernel& m, const ExpPolyKernel& mtilde,
                             MemoryVariant variant, double T);

} // namespace memoctrl
