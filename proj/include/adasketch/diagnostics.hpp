#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adasketch/embeddings.hpp"
#include "adasketch/problem.hpp"

namespace adasketch {

struct ConcentrationReport {
  std::string kind;  // "event", "gaussian-deviation" or "srht-rownorm"
  SketchFamily family = SketchFamily::Gaussian;
  Index m = 0;
  double rho = 0.0;
  double delta = 0.0;
  Index trials = 0;
  double empirical_success = 0.0;
  /// (q, value) pairs of the per-trial statistic, q ascending.
  std::vector<std::pair<double, double>> deviation_quantiles;
  /// Median of statistic / bound; descriptive only.
  double median_bound_ratio = 0.0;
};

/// JSON object with keys family, m, rho, delta, trials, success, quantiles
/// (plus kind and median_bound_ratio).
std::string to_json(const ConcentrationReport& report);

inline constexpr Index kMinTrials = 50;

/// Fraction of independent draws with ‖C_S − I‖₂ ≤ max{√ρ, ρ}.
ConcentrationReport estimate_event_probability(const RegularizedProblem& p, SketchFamily family,
                                               Index m, double rho, Index trials,
                                               std::uint64_t seed, Index s = 1);

/// Gaussian sketches at m ≥ m_δ/ρ: per trial, checks
/// λ_max(C_S − I) ≤ ‖D‖²(2√ρ + ρ) and λ_min(C_S − I) ≥ −‖D‖²·max{2√ρ − ρ, ρ}.
ConcentrationReport gaussian_deviation_check(const RegularizedProblem& p, Index m, Index trials,
                                             double delta, double rho, std::uint64_t seed);

/// Max row norm of H·diag(ε)·U·D̄ against √(d_e/n) + √(8 log(n/δ)/n), fresh
/// signs per trial. Requires n to be a power of two.
ConcentrationReport srht_rownorm_check(const RegularizedProblem& p, Index trials, double delta,
                                       std::uint64_t seed);

/// √(d_e/n) + √(8 log(n/δ)/n).
double srht_rownorm_bound(double d_e, Index n, double delta);

/// Monte Carlo mean of ‖D̄ᵀh‖₂ for h ~ N(0, I).
double gaussian_width_mc(const Matrix& radii, Index samples, std::uint64_t seed);

/// ‖D‖₂² = max eigenvalue of H^{-1}AᵀA.
double d_norm_squared(const RegularizedProblem& p);

}  // namespace adasketch
