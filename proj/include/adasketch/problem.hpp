#pragma once

#include <cstdint>
#include <string>

#include "adasketch/linalg.hpp"

namespace adasketch {

/// f(x) = ½ tr(xᵀHx) − tr(Bᵀx) with H = AᵀA + ν²Λ. Columns of B are
/// independent right-hand sides sharing one Hessian.
class RegularizedProblem {
 public:
  RegularizedProblem(Matrix A, Matrix B, double nu, Diagonal lambda);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  double nu() const { return nu_; }
  const Diagonal& lambda() const { return lambda_; }

  Index n() const { return A_.rows(); }
  Index d() const { return A_.cols(); }
  Index c() const { return B_.cols(); }

  /// H·X through two products with A; H itself is never formed.
  Matrix hessian_times(const Matrix& X) const;
  /// ∇f(X) = H·X − B.
  Matrix gradient(const Matrix& X) const;
  /// Explicit H, for direct solves and diagnostics.
  Matrix hessian() const;

 private:
  Matrix A_;
  Matrix B_;
  double nu_;
  Diagonal lambda_;
};

/// Ridge regression min ½‖AX − Y‖² + (λ/2)‖X‖² as B = AᵀY, ν² = λ, Λ = I.
RegularizedProblem from_ridge(const Matrix& A, const Matrix& Y, double lambda_reg);

struct ExactSolution {
  Matrix x_star;
  std::string method = "direct";
};

ExactSolution direct_solve(const RegularizedProblem& p);

/// δ = ½ tr((X − X*)ᵀ H (X − X*)), summed over right-hand sides.
double exact_error(const RegularizedProblem& p, const Matrix& X, const ExactSolution& sol);

/// d_e from the eigenvalues s_i of Λ^{-1/2}AᵀAΛ^{-1/2}: Σq_i / max q_i with
/// q_i = s_i/(s_i + ν²). Returns 0 when every s_i is zero.
double effective_dimension_from_spectrum(const Vector& s, double nu);

/// Eigenvalues of Λ^{-1/2}AᵀAΛ^{-1/2}, clamped at zero, non-increasing.
Vector scaled_gram_spectrum(const Matrix& A, const Diagonal& lambda);

double effective_dimension(const RegularizedProblem& p);

/// Bisection on log ν for a target d_e. d_e decreases from rank(A) as ν → 0
/// to Σs_i/max s_i as ν → ∞; targets outside that range throw InvalidArgument.
double nu_for_effective_dimension(const Vector& s, double target, double tol = 1e-10);

struct SyntheticProblem {
  RegularizedProblem problem;
  Matrix x_true;
};

/// A = U diag(decay^1, ..., decay^d) Vᵀ with U, V orthonormalized Gaussian
/// draws, Λ = I, B = H x_true for a Gaussian x_true with c columns.
SyntheticProblem gen_synthetic(Index n, Index d, double decay, double nu, std::uint64_t seed,
                               Index c = 1);

/// Random Fourier features for exp(−γ‖x − x′‖²): rows √(2/D)·cos(Wx + u),
/// W ~ N(0, 2γ), u ~ U[0, 2π).
Matrix random_features(const Matrix& X, double gamma, Index D_out, std::uint64_t seed);

}  // namespace adasketch
