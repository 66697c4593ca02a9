#include "adasketch/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "adasketch/errors.hpp"

namespace adasketch {

Diagonal::Diagonal(Vector entries) : entries_(std::move(entries)) {
  for (Index i = 0; i < entries_.size(); ++i) {
    if (!(entries_[i] > 0.0) || !std::isfinite(entries_[i])) {
      throw Error(Errc::InvalidArgument,
                  "diagonal entry " + std::to_string(i) + " must be positive and finite");
    }
  }
}

Diagonal Diagonal::identity(Index size) { return Diagonal(Vector::Ones(size)); }

CholeskyFactor::CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {
  if (lower_.rows() != lower_.cols()) {
    throw Error(Errc::DimensionMismatch, "Cholesky factor must be square");
  }
}

Matrix CholeskyFactor::solve(const Matrix& rhs) const {
  if (rhs.rows() != size()) {
    throw Error(Errc::DimensionMismatch, "right-hand side has " + std::to_string(rhs.rows()) +
                                             " rows, factor has size " + std::to_string(size()));
  }
  Matrix y = lower_.triangularView<Eigen::Lower>().solve(rhs);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

CholeskyFactor cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(Errc::DimensionMismatch, "cholesky needs a square matrix");
  }
  if (!m.allFinite()) {
    throw Error(Errc::NotPositiveDefinite, "matrix has non-finite entries");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * std::max(scale, 1e-300)) {
    throw Error(Errc::InvalidArgument, "matrix is not symmetric (max |M - Mᵀ| = " +
                                           std::to_string(asym) + ")");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::NotPositiveDefinite, "non-positive pivot encountered");
  }
  Matrix lower = llt.matrixL();
  if ((lower.diagonal().array() <= 0.0).any()) {
    throw Error(Errc::NotPositiveDefinite, "non-positive pivot encountered");
  }
  return CholeskyFactor(std::move(lower));
}

Vector tri_solve(const CholeskyFactor& factor, const Vector& z, bool transposed) {
  if (z.size() != factor.size()) {
    throw Error(Errc::DimensionMismatch, "vector length " + std::to_string(z.size()) +
                                             " does not match factor size " +
                                             std::to_string(factor.size()));
  }
  if (transposed) {
    return factor.lower().transpose().triangularView<Eigen::Upper>().solve(z);
  }
  return factor.lower().triangularView<Eigen::Lower>().solve(z);
}

bool is_power_of_two(std::size_t n) { return std::has_single_bit(n); }

std::size_t next_power_of_two(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

void fwht_inplace(std::span<double> x, bool normalized) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw Error(Errc::NotPowerOfTwo, "length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
  if (normalized) {
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (double& v : x) v *= s;
  }
}

Vector fwht(const Vector& x, bool normalized) {
  Vector y = x;
  fwht_inplace(std::span<double>(y.data(), static_cast<std::size_t>(y.size())), normalized);
  return y;
}

SymEig sym_eig(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(Errc::DimensionMismatch, "sym_eig needs a square matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::ConvergenceFailure, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order.
  const Index d = m.rows();
  SymEig out{Vector(d), Matrix(d, d)};
  for (Index i = 0; i < d; ++i) {
    out.values[i] = solver.eigenvalues()[d - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(d - 1 - i);
  }
  return out;
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::DimensionMismatch, "frobenius_dot operands differ in shape");
  }
  return (a.array() * b.array()).sum();
}

}  // namespace adasketch
