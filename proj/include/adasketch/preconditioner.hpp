#pragma once

#include <algorithm>
#include <cmath>

#include "adasketch/embeddings.hpp"
#include "adasketch/linalg.hpp"
#include "adasketch/problem.hpp"

namespace adasketch {

enum class FactorPath { CholeskyD, WoodburyM };

std::string_view to_string(FactorPath path);

/// Factorization of H_S = (SA)ᵀSA + ν²Λ. With m ≥ d the d×d matrix H_S is
/// factored; with m < d the m×m matrix W_S = SAΛ⁻¹(SA)ᵀ + ν²I is factored and
/// solves go through the Woodbury identity.
class Preconditioner {
 public:
  static Preconditioner build(const SketchedData& sketched, double nu, const Diagonal& lambda);
  /// Builds with the requested path regardless of m; used to compare the two paths.
  static Preconditioner build_with_path(const SketchedData& sketched, double nu,
                                        const Diagonal& lambda, FactorPath path);

  /// Returns V with H_S V = Z, column by column.
  Matrix solve(const Matrix& Z) const;

  /// Explicit H_S, for diagnostics.
  Matrix hs() const;

  FactorPath path() const { return path_; }
  Index m() const { return SA_.rows(); }
  Index d() const { return SA_.cols(); }
  const Matrix& SA() const { return SA_; }
  double nu() const { return nu_; }
  const Diagonal& lambda() const { return lambda_; }
  const SketchSpec& spec() const { return spec_; }

 private:
  Preconditioner(Matrix SA, double nu, Diagonal lambda, SketchSpec spec, FactorPath path,
                 CholeskyFactor factor);

  Matrix SA_;
  double nu_;
  Diagonal lambda_;
  SketchSpec spec_;
  FactorPath path_;
  CholeskyFactor factor_;
};

/// δ̃ = ½ tr(gradᵀ H_S⁻¹ grad). Throws NegativeValue when the quadratic form
/// is below −1e−12‖grad‖², which only a broken factorization can produce.
double approx_newton_decrement(const Preconditioner& P, const Matrix& grad);

/// Extreme eigenvalues of C_S − I with C_S = H^{-1/2} H_S H^{-1/2}.
struct CsDeviation {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  /// ‖C_S − I‖₂
  double norm() const { return std::max(std::abs(lambda_max), std::abs(lambda_min)); }
};

CsDeviation cs_deviation(const Preconditioner& P, const RegularizedProblem& p);

/// Caches H^{-1/2} so many sketches of one problem can be measured cheaply.
/// C_S − I is formed as H^{-1/2}((SA)ᵀSA − AᵀA)H^{-1/2} to avoid cancellation.
class CsMeter {
 public:
  explicit CsMeter(const RegularizedProblem& p);
  CsDeviation deviation(const Matrix& SA) const;
  /// C_S − I, symmetrized.
  Matrix deviation_matrix(const Matrix& SA) const;
  const Matrix& h_sqrt() const { return h_sqrt_; }
  const Matrix& h_inv_sqrt() const { return h_inv_sqrt_; }

 private:
  Matrix gram_;
  Matrix h_sqrt_;
  Matrix h_inv_sqrt_;
};

/// Full eigendecomposition of C_S together with H^{1/2}.
struct CsSpectrum {
  Vector eigenvalues;  // of C_S, non-increasing
  Matrix eigenvectors;
  Matrix h_sqrt;
};

CsSpectrum cs_spectrum(const Preconditioner& P, const RegularizedProblem& p);

}  // namespace adasketch
