#include "adasketch/preconditioner.hpp"

#include <cmath>
#include <string>

#include "adasketch/errors.hpp"

namespace adasketch {

std::string_view to_string(FactorPath path) {
  return path == FactorPath::CholeskyD ? "cholesky-d" : "woodbury-m";
}

Preconditioner::Preconditioner(Matrix SA, double nu, Diagonal lambda, SketchSpec spec,
                               FactorPath path, CholeskyFactor factor)
    : SA_(std::move(SA)),
      nu_(nu),
      lambda_(std::move(lambda)),
      spec_(spec),
      path_(path),
      factor_(std::move(factor)) {}

Preconditioner Preconditioner::build(const SketchedData& sketched, double nu,
                                     const Diagonal& lambda) {
  const FactorPath path =
      sketched.SA.rows() >= sketched.SA.cols() ? FactorPath::CholeskyD : FactorPath::WoodburyM;
  return build_with_path(sketched, nu, lambda, path);
}

Preconditioner Preconditioner::build_with_path(const SketchedData& sketched, double nu,
                                               const Diagonal& lambda, FactorPath path) {
  const Matrix& SA = sketched.SA;
  if (SA.cols() != lambda.size()) {
    throw Error(Errc::DimensionMismatch, "SA has " + std::to_string(SA.cols()) +
                                             " columns, Lambda has size " +
                                             std::to_string(lambda.size()));
  }
  if (!(nu > 0.0)) throw Error(Errc::InvalidArgument, "nu must be positive");
  const double nu2 = nu * nu;
  if (path == FactorPath::CholeskyD) {
    Matrix H_S = SA.transpose() * SA;
    H_S.diagonal() += nu2 * lambda.entries();
    return Preconditioner(SA, nu, lambda, sketched.spec, path, cholesky(H_S));
  }
  const Matrix scaled = SA * lambda.entries().cwiseInverse().asDiagonal();
  Matrix W = scaled * SA.transpose();
  W.diagonal().array() += nu2;
  return Preconditioner(SA, nu, lambda, sketched.spec, path, cholesky(W));
}

Matrix Preconditioner::solve(const Matrix& Z) const {
  if (Z.rows() != d()) {
    throw Error(Errc::DimensionMismatch, "right-hand side has " + std::to_string(Z.rows()) +
                                             " rows, expected " + std::to_string(d()));
  }
  if (path_ == FactorPath::CholeskyD) return factor_.solve(Z);
  // v = Λ⁻¹/ν² (z − (SA)ᵀ W⁻¹ SA Λ⁻¹ z)
  const Vector inv_lambda = lambda_.entries().cwiseInverse();
  const Matrix scaled = inv_lambda.asDiagonal() * Z;
  const Matrix inner = factor_.solve(SA_ * scaled);
  Matrix V = Z - SA_.transpose() * inner;
  return (1.0 / (nu_ * nu_)) * (inv_lambda.asDiagonal() * V);
}

Matrix Preconditioner::hs() const {
  Matrix H_S = SA_.transpose() * SA_;
  H_S.diagonal() += (nu_ * nu_) * lambda_.entries();
  return H_S;
}

double approx_newton_decrement(const Preconditioner& P, const Matrix& grad) {
  const double q = frobenius_dot(grad, P.solve(grad));
  const double scale = grad.squaredNorm();
  if (q < -1e-12 * scale) {
    throw Error(Errc::NegativeValue, "gradᵀ H_S⁻¹ grad = " + std::to_string(q) + " is negative");
  }
  return 0.5 * std::max(q, 0.0);
}

CsMeter::CsMeter(const RegularizedProblem& p) : gram_(p.A().transpose() * p.A()) {
  const SymEig eig = sym_eig(p.hessian());
  if (eig.values.minCoeff() <= 0.0) {
    throw Error(Errc::NotPositiveDefinite, "H has a non-positive eigenvalue");
  }
  const Vector root = eig.values.array().sqrt();
  h_sqrt_ = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  h_inv_sqrt_ = eig.vectors * root.cwiseInverse().asDiagonal() * eig.vectors.transpose();
}

Matrix CsMeter::deviation_matrix(const Matrix& SA) const {
  if (SA.cols() != gram_.cols()) {
    throw Error(Errc::DimensionMismatch, "SA has " + std::to_string(SA.cols()) +
                                             " columns, problem has d = " +
                                             std::to_string(gram_.cols()));
  }
  const Matrix diff = SA.transpose() * SA - gram_;
  const Matrix E = h_inv_sqrt_ * diff * h_inv_sqrt_;
  return 0.5 * (E + E.transpose());
}

CsDeviation CsMeter::deviation(const Matrix& SA) const {
  const SymEig eig = sym_eig(deviation_matrix(SA));
  return CsDeviation{eig.values[0], eig.values[eig.values.size() - 1]};
}

CsDeviation cs_deviation(const Preconditioner& P, const RegularizedProblem& p) {
  if (P.d() != p.d()) {
    throw Error(Errc::DimensionMismatch, "preconditioner and problem differ in d");
  }
  return CsMeter(p).deviation(P.SA());
}

CsSpectrum cs_spectrum(const Preconditioner& P, const RegularizedProblem& p) {
  if (P.d() != p.d()) {
    throw Error(Errc::DimensionMismatch, "preconditioner and problem differ in d");
  }
  const CsMeter meter(p);
  Matrix C = meter.deviation_matrix(P.SA());
  C.diagonal().array() += 1.0;
  SymEig eig = sym_eig(C);
  return CsSpectrum{std::move(eig.values), std::move(eig.vectors), meter.h_sqrt()};
}

}  // namespace adasketch
