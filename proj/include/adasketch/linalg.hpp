#pragma once

// Dense kernels shared by every other module: Cholesky with triangular
// solves, the fast Walsh-Hadamard transform, and a symmetric eigensolver
// reserved for diagnostics.

#include <span>

#include <Eigen/Dense>

namespace adasketch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Positive diagonal matrix stored by its entries.
class Diagonal {
 public:
  Diagonal() = default;
  explicit Diagonal(Vector entries);
  static Diagonal identity(Index size);

  Index size() const { return entries_.size(); }
  const Vector& entries() const { return entries_; }
  double operator[](Index i) const { return entries_[i]; }
  double min() const { return entries_.minCoeff(); }
  double max() const { return entries_.maxCoeff(); }

 private:
  Vector entries_;
};

/// Lower-triangular L with L Lᵀ equal to the factored matrix.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Matrix lower);

  Index size() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  /// Solves M X = Z for every column of Z.
  Matrix solve(const Matrix& rhs) const;

 private:
  Matrix lower_;
};

/// Relative asymmetry accepted before a matrix is symmetrized and factored.
inline constexpr double kSymmetryTolerance = 1e-12;

/// Throws NotPositiveDefinite when a pivot is not strictly positive.
CholeskyFactor cholesky(const Matrix& m);

/// Forward (L y = z) or backward (Lᵀ y = z) substitution.
Vector tri_solve(const CholeskyFactor& factor, const Vector& z, bool transposed);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place Walsh-Hadamard transform in Sylvester ordering. With `normalized`
/// the transform is scaled by 1/sqrt(n) and is then orthonormal and involutive.
void fwht_inplace(std::span<double> x, bool normalized);
Vector fwht(const Vector& x, bool normalized);

struct SymEig {
  Vector values;   // non-increasing
  Matrix vectors;  // orthonormal columns matching `values`
};

SymEig sym_eig(const Matrix& m);

/// Frobenius inner product ⟨a, b⟩ = trace(aᵀ b).
double frobenius_dot(const Matrix& a, const Matrix& b);

}  // namespace adasketch
