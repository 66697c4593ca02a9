#include "adasketch/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "adasketch/errors.hpp"
#include "adasketch/rng.hpp"

namespace adasketch {

namespace {

constexpr Index kGaussianRowBlock = 256;

void check_m(Index m) {
  if (m < 1) throw Error(Errc::InvalidArgument, "sketch size m must be at least 1");
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(Errc::InvalidProbability, "delta must lie in (0, 1), got " + std::to_string(delta));
  }
}

void check_effective_dimension(double d_e) {
  if (!(d_e >= 1.0)) throw Error(Errc::InvalidArgument, "d_e must be at least 1");
}

}  // namespace

std::string_view to_string(SketchFamily family) {
  switch (family) {
    case SketchFamily::Gaussian: return "gaussian";
    case SketchFamily::Srht: return "srht";
    case SketchFamily::Sjlt: return "sjlt";
  }
  return "unknown";
}

SketchFamily parse_sketch_family(std::string_view name) {
  if (name == "gaussian") return SketchFamily::Gaussian;
  if (name == "srht") return SketchFamily::Srht;
  if (name == "sjlt") return SketchFamily::Sjlt;
  throw Error(Errc::InvalidArgument, "unknown sketch family '" + std::string(name) + "'");
}

SketchedData sketch_gaussian(const Matrix& A, Index m, std::uint64_t seed) {
  check_m(m);
  const Index n = A.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix SA(m, A.cols());
  Matrix block;
  for (Index r0 = 0; r0 < m; r0 += kGaussianRowBlock) {
    const Index rows = std::min(kGaussianRowBlock, m - r0);
    block.resize(rows, n);
    for (Index i = 0; i < rows; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(r0 + i));
      for (Index j = 0; j < n; ++j) block(i, j) = scale * rng.normal();
    }
    SA.middleRows(r0, rows).noalias() = block * A;
  }
  return SketchedData{std::move(SA), SketchSpec{SketchFamily::Gaussian, m, 1, seed}, n};
}

SketchedData sketch_srht(const Matrix& A, Index m, std::uint64_t seed) {
  check_m(m);
  const Index n = A.rows();
  const Index n_p = static_cast<Index>(next_power_of_two(static_cast<std::size_t>(n)));
  if (m > n_p) {
    throw Error(Errc::SketchTooLarge, "m = " + std::to_string(m) + " exceeds padded length " +
                                          std::to_string(n_p));
  }

  Vector signs(n);
  CounterRng sign_rng(seed, 0);
  for (Index i = 0; i < n; ++i) signs[i] = sign_rng.sign();

  // Partial Fisher-Yates: the first m slots end up a uniform m-subset in draw order.
  std::vector<Index> rows(static_cast<std::size_t>(n_p));
  std::iota(rows.begin(), rows.end(), Index{0});
  CounterRng pick_rng(seed, 1);
  for (Index k = 0; k < m; ++k) {
    const Index j = k + static_cast<Index>(pick_rng.below(static_cast<std::uint64_t>(n_p - k)));
    std::swap(rows[k], rows[j]);
  }

  const double scale = std::sqrt(static_cast<double>(n_p) / static_cast<double>(m));
  Matrix SA(m, A.cols());
  Vector work(n_p);
  for (Index c = 0; c < A.cols(); ++c) {
    work.head(n) = signs.cwiseProduct(A.col(c));
    work.tail(n_p - n).setZero();
    fwht_inplace(std::span<double>(work.data(), static_cast<std::size_t>(n_p)), true);
    for (Index k = 0; k < m; ++k) SA(k, c) = scale * work[rows[k]];
  }
  return SketchedData{std::move(SA), SketchSpec{SketchFamily::Srht, m, 1, seed}, n};
}

SketchedData sketch_sjlt(const Matrix& A, Index m, Index s, std::uint64_t seed) {
  check_m(m);
  if (s < 1 || s > m) {
    throw Error(Errc::InvalidSparsity, "need 1 <= s <= m, got s = " + std::to_string(s) +
                                           ", m = " + std::to_string(m));
  }
  const Index n = A.rows();
  const double value = 1.0 / std::sqrt(static_cast<double>(s));
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n * s));
  std::vector<Index> chosen;
  for (Index j = 0; j < n; ++j) {
    CounterRng rng(seed, static_cast<std::uint64_t>(j));
    // Floyd's sampling of s distinct rows out of m.
    chosen.clear();
    for (Index t = m - s; t < m; ++t) {
      const Index r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(t + 1)));
      const bool seen = std::find(chosen.begin(), chosen.end(), r) != chosen.end();
      chosen.push_back(seen ? t : r);
    }
    for (Index r : chosen) entries.emplace_back(r, j, rng.sign() * value);
  }
  Eigen::SparseMatrix<double> S(m, n);
  S.setFromTriplets(entries.begin(), entries.end());
  Matrix SA = S * A;
  return SketchedData{std::move(SA), SketchSpec{SketchFamily::Sjlt, m, s, seed}, n};
}

SketchedData sketch(const Matrix& A, const SketchSpec& spec) {
  switch (spec.family) {
    case SketchFamily::Gaussian: return sketch_gaussian(A, spec.m, spec.seed);
    case SketchFamily::Srht: return sketch_srht(A, spec.m, spec.seed);
    case SketchFamily::Sjlt: return sketch_sjlt(A, spec.m, spec.s, spec.seed);
  }
  throw Error(Errc::InvalidArgument, "unknown sketch family");
}

Index max_sketch_rows(SketchFamily family, Index n) {
  if (family == SketchFamily::Srht) {
    return static_cast<Index>(next_power_of_two(static_cast<std::size_t>(n)));
  }
  return n;
}

double critical_m_srht(double d_e, Index n, double delta) {
  check_delta(delta);
  check_effective_dimension(d_e);
  if (n < 1) throw Error(Errc::InvalidArgument, "n must be at least 1");
  const double nn = static_cast<double>(n);
  const double root = std::sqrt(d_e) + std::sqrt(8.0 * std::log(2.0 * nn / delta));
  return 16.0 * std::log(16.0 * d_e / delta) * root * root;
}

double critical_m_gaussian(double d_e, double delta) {
  check_delta(delta);
  check_effective_dimension(d_e);
  const double root = std::sqrt(d_e) + std::sqrt(8.0 * std::log(16.0 / delta));
  return root * root;
}

}  // namespace adasketch
