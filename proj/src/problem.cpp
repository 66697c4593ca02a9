#include "adasketch/problem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "adasketch/errors.hpp"
#include "adasketch/rng.hpp"

namespace adasketch {

namespace {

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed, double stddev) {
  Matrix G(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    CounterRng rng(seed, static_cast<std::uint64_t>(j));
    for (Index i = 0; i < rows; ++i) G(i, j) = stddev * rng.normal();
  }
  return G;
}

Matrix orthonormal_columns(Index rows, Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rows, cols, seed, 1.0));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

}  // namespace

RegularizedProblem::RegularizedProblem(Matrix A, Matrix B, double nu, Diagonal lambda)
    : A_(std::move(A)), B_(std::move(B)), nu_(nu), lambda_(std::move(lambda)) {
  if (A_.rows() < 1 || A_.cols() < 1) {
    throw Error(Errc::InvalidArgument, "A must have at least one row and one column");
  }
  if (B_.cols() < 1) throw Error(Errc::InvalidArgument, "B must have at least one column");
  if (B_.rows() != A_.cols()) {
    throw Error(Errc::DimensionMismatch, "B has " + std::to_string(B_.rows()) +
                                             " rows, expected d = " + std::to_string(A_.cols()));
  }
  if (lambda_.size() != A_.cols()) {
    throw Error(Errc::DimensionMismatch, "Lambda has size " + std::to_string(lambda_.size()) +
                                             ", expected d = " + std::to_string(A_.cols()));
  }
  if (!(nu_ > 0.0) || !std::isfinite(nu_)) {
    throw Error(Errc::InvalidArgument, "nu must be positive and finite");
  }
  if (lambda_.min() < 1.0) throw Error(Errc::InvalidArgument, "Lambda entries must be >= 1");
  if (!A_.allFinite() || !B_.allFinite()) {
    throw Error(Errc::InvalidArgument, "A and B must have finite entries");
  }
}

Matrix RegularizedProblem::hessian_times(const Matrix& X) const {
  if (X.rows() != d()) {
    throw Error(Errc::DimensionMismatch, "iterate has " + std::to_string(X.rows()) +
                                             " rows, expected " + std::to_string(d()));
  }
  Matrix AX = A_ * X;
  Matrix out = A_.transpose() * AX;
  out.noalias() += (nu_ * nu_) * (lambda_.entries().asDiagonal() * X);
  return out;
}

Matrix RegularizedProblem::gradient(const Matrix& X) const { return hessian_times(X) - B_; }

Matrix RegularizedProblem::hessian() const {
  Matrix H = A_.transpose() * A_;
  H.diagonal() += (nu_ * nu_) * lambda_.entries();
  return H;
}

RegularizedProblem from_ridge(const Matrix& A, const Matrix& Y, double lambda_reg) {
  if (Y.rows() != A.rows()) {
    throw Error(Errc::DimensionMismatch, "targets have " + std::to_string(Y.rows()) +
                                             " rows, A has " + std::to_string(A.rows()));
  }
  if (!(lambda_reg > 0.0)) throw Error(Errc::InvalidArgument, "lambda_reg must be positive");
  return RegularizedProblem(A, A.transpose() * Y, std::sqrt(lambda_reg),
                            Diagonal::identity(A.cols()));
}

ExactSolution direct_solve(const RegularizedProblem& p) {
  const CholeskyFactor L = cholesky(p.hessian());
  return ExactSolution{L.solve(p.B()), "direct"};
}

double exact_error(const RegularizedProblem& p, const Matrix& X, const ExactSolution& sol) {
  if (X.rows() != sol.x_star.rows() || X.cols() != sol.x_star.cols()) {
    throw Error(Errc::DimensionMismatch, "iterate and solution differ in shape");
  }
  const Matrix diff = X - sol.x_star;
  return std::max(0.0, 0.5 * frobenius_dot(diff, p.hessian_times(diff)));
}

double effective_dimension_from_spectrum(const Vector& s, double nu) {
  const double nu2 = nu * nu;
  double sum = 0.0;
  double top = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    const double si = std::max(s[i], 0.0);
    const double q = si / (si + nu2);
    sum += q;
    top = std::max(top, q);
  }
  return top > 0.0 ? sum / top : 0.0;
}

Vector scaled_gram_spectrum(const Matrix& A, const Diagonal& lambda) {
  const Vector inv_sqrt = lambda.entries().array().rsqrt();
  const Matrix scaled = A * inv_sqrt.asDiagonal();
  Vector s = sym_eig(scaled.transpose() * scaled).values;
  return s.cwiseMax(0.0);
}

double effective_dimension(const RegularizedProblem& p) {
  return effective_dimension_from_spectrum(scaled_gram_spectrum(p.A(), p.lambda()), p.nu());
}

double nu_for_effective_dimension(const Vector& s, double target, double tol) {
  const double top = s.size() > 0 ? s.maxCoeff() : 0.0;
  if (!(top > 0.0)) throw Error(Errc::InvalidArgument, "spectrum is identically zero");
  const double floor_value = s.cwiseMax(0.0).sum() / top;
  const double ceiling_value = static_cast<double>((s.array() > 0.0).count());
  if (!(target > floor_value && target < ceiling_value)) {
    throw Error(Errc::InvalidArgument,
                "target d_e = " + std::to_string(target) + " is outside the attainable range (" +
                    std::to_string(floor_value) + ", " + std::to_string(ceiling_value) + ")");
  }
  double lo = std::log(std::sqrt(top)) - 40.0;  // d_e near rank
  double hi = std::log(std::sqrt(top)) + 40.0;  // d_e near its floor
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (effective_dimension_from_spectrum(s, std::exp(mid)) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

SyntheticProblem gen_synthetic(Index n, Index d, double decay, double nu, std::uint64_t seed,
                               Index c) {
  if (!(decay > 0.0 && decay < 1.0)) {
    throw Error(Errc::InvalidDecay, "decay must lie in (0, 1), got " + std::to_string(decay));
  }
  if (d < 1 || n < d) throw Error(Errc::InvalidArgument, "need n >= d >= 1");
  if (c < 1) throw Error(Errc::InvalidArgument, "need at least one right-hand side");

  const Matrix U = orthonormal_columns(n, d, derive_seed(seed, 1));
  const Matrix V = orthonormal_columns(d, d, derive_seed(seed, 2));
  Vector sigma(d);
  for (Index j = 0; j < d; ++j) sigma[j] = std::pow(decay, static_cast<double>(j + 1));
  Matrix A = U * sigma.asDiagonal() * V.transpose();
  Matrix x_true = gaussian_matrix(d, c, derive_seed(seed, 3), 1.0);

  RegularizedProblem shell(A, Matrix::Zero(d, c), nu, Diagonal::identity(d));
  Matrix B = shell.hessian_times(x_true);
  return SyntheticProblem{RegularizedProblem(std::move(A), std::move(B), nu, Diagonal::identity(d)),
                          std::move(x_true)};
}

Matrix random_features(const Matrix& X, double gamma, Index D_out, std::uint64_t seed) {
  if (!(gamma > 0.0)) throw Error(Errc::InvalidArgument, "gamma must be positive");
  if (D_out < 1) throw Error(Errc::InvalidArgument, "D_out must be at least 1");
  const Index p = X.cols();
  const Matrix W = gaussian_matrix(p, D_out, derive_seed(seed, 1), std::sqrt(2.0 * gamma));
  Vector u(D_out);
  CounterRng phase(derive_seed(seed, 2), 0);
  for (Index k = 0; k < D_out; ++k) u[k] = 2.0 * std::numbers::pi * phase.uniform();

  Matrix Z = X * W;
  Z.rowwise() += u.transpose();
  const double scale = std::sqrt(2.0 / static_cast<double>(D_out));
  return (Z.array().cos() * scale).matrix();
}

}  // namespace adasketch
