#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aimdq/model.hpp"

namespace aimdq::spectral {

// Minimal dense row-major square matrix.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> a;  // row-major, n*n

  static Matrix zero(std::size_t n) { return Matrix{n, std::vector<double>(n * n, 0.0)}; }
  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// The aggregate admission map U(k+1) = phi U(k) + 2 alpha_bar lambda,
// with phi = diag(beta) - 2 alpha_bar beta'.
struct AggregateMatrix {
  Matrix phi;
  std::vector<double> beta;       // diagonal of B, node order
  std::vector<double> alpha_bar;  // normalized growth vector, sums to 1
};

struct EigenBracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct SpectralReport {
  std::vector<double> eigenvalues;     // sorted ascending, all real
  std::vector<EigenBracket> brackets;  // interlacing interval per eigenvalue
  std::vector<double> z;               // z_i = sqrt(alpha_bar_i beta_i), node order
  double spectral_radius = 0.0;
  bool schur = false;                  // spectral_radius < 1
  double det_residual = 0.0;           // |prod eig + prod beta|
  bool interlacing_ok = false;
  bool det_identity_ok = false;        // det_residual / prod beta < 1e-8
  bool structure_ok = false;           // one negative eigenvalue in [-max beta, 0), rest in (0,1)
  int deflated = 0;                    // eigenvalues resolved by deflation
};

AggregateMatrix build_phi(const ValidatedConfig& cfg);

// Similarity transform of phi to symmetric form diag(d) - 2 z z' with
// d = beta and z_i = sqrt(alpha_bar_i beta_i); spectra coincide.
struct Symmetrized {
  std::vector<double> d;
  std::vector<double> z;
};
Symmetrized symmetrize(const AggregateMatrix& m);

// Eigenvalues of diag(d) + rho z z' via the secular equation
//   1 + rho sum_j z_j^2 / (d_j - c) = 0,
// one root per interlacing interval. Entries with |z_j| below the deflation
// threshold, and repeated d_j (clustered within 1e-14 * max|d|), deflate to
// exact eigenvalues d_j before the solve.
struct RankOneEigs {
  std::vector<double> eigenvalues;     // sorted ascending
  std::vector<EigenBracket> brackets;  // bracket used (or deflation point) per eigenvalue
  int deflated = 0;
};
RankOneEigs rank_one_eigs(std::span<const double> d, double rho, std::span<const double> z);

// Full certificate for the aggregate map: spectrum, interlacing brackets,
// Schur flag, and the determinant identity prod eig = -prod beta.
SpectralReport schur_check(const AggregateMatrix& m);

// One step of the aggregate affine map.
std::vector<double> iterate_aggregate(std::span<const double> u, const AggregateMatrix& m,
                                      double lambda);

}  // namespace aimdq::spectral
