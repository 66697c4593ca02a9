#include "adasketch/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "adasketch/errors.hpp"
#include "adasketch/preconditioner.hpp"
#include "adasketch/rng.hpp"

namespace adasketch {

namespace {

constexpr double kQuantiles[] = {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};

double quantile(std::vector<double> sorted, double q) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void fill_quantiles(ConcentrationReport& report, const std::vector<double>& values) {
  report.deviation_quantiles.clear();
  for (double q : kQuantiles) report.deviation_quantiles.emplace_back(q, quantile(values, q));
}

void check_trials(Index trials) {
  if (trials < kMinTrials) {
    throw Error(Errc::InvalidArgument,
                "need at least " + std::to_string(kMinTrials) + " trials, got " +
                    std::to_string(trials));
  }
}

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw Error(Errc::InvalidArgument, "rho must lie in (0, 1)");
  }
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(Errc::InvalidProbability, "delta must lie in (0, 1)");
  }
}

}  // namespace

std::string to_json(const ConcentrationReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = report.kind;
  j["family"] = std::string(to_string(report.family));
  j["m"] = report.m;
  j["rho"] = report.rho;
  j["delta"] = report.delta;
  j["trials"] = report.trials;
  j["success"] = report.empirical_success;
  auto quantiles = nlohmann::ordered_json::array();
  for (const auto& [q, v] : report.deviation_quantiles) {
    quantiles.push_back({{"q", q}, {"value", v}});
  }
  j["quantiles"] = std::move(quantiles);
  j["median_bound_ratio"] = report.median_bound_ratio;
  return j.dump();
}

ConcentrationReport estimate_event_probability(const RegularizedProblem& p, SketchFamily family,
                                               Index m, double rho, Index trials,
                                               std::uint64_t seed, Index s) {
  check_trials(trials);
  check_rho(rho);
  const CsMeter meter(p);
  const double threshold = std::max(std::sqrt(rho), rho);
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(trials));
  Index hits = 0;
  for (Index k = 0; k < trials; ++k) {
    const SketchSpec spec{family, m, s, derive_seed(seed, static_cast<std::uint64_t>(k))};
    const double norm = meter.deviation(sketch(p.A(), spec).SA).norm();
    norms.push_back(norm);
    if (norm <= threshold) ++hits;
  }
  ConcentrationReport report;
  report.kind = "event";
  report.family = family;
  report.m = m;
  report.rho = rho;
  report.trials = trials;
  report.empirical_success = static_cast<double>(hits) / static_cast<double>(trials);
  fill_quantiles(report, norms);
  std::vector<double> ratios;
  for (double v : norms) ratios.push_back(v / threshold);
  report.median_bound_ratio = quantile(ratios, 0.5);
  return report;
}

double d_norm_squared(const RegularizedProblem& p) {
  const Vector s = scaled_gram_spectrum(p.A(), p.lambda());
  const double top = s.size() ? s.maxCoeff() : 0.0;
  return top / (top + p.nu() * p.nu());
}

ConcentrationReport gaussian_deviation_check(const RegularizedProblem& p, Index m, Index trials,
                                             double delta, double rho, std::uint64_t seed) {
  check_trials(trials);
  check_rho(rho);
  check_delta(delta);
  const double d_e = effective_dimension(p);
  if (d_e >= 1.0) {
    const double required = critical_m_gaussian(d_e, delta) / rho;
    if (static_cast<double>(m) < required) {
      throw Error(Errc::InvalidArgument, "m = " + std::to_string(m) + " is below m_delta/rho = " +
                                             std::to_string(required));
    }
  }
  const double D2 = d_norm_squared(p);
  const double root = std::sqrt(rho);
  const double upper = D2 * (2.0 * root + rho);
  const double lower = -D2 * std::max(2.0 * root - rho, rho);

  const CsMeter meter(p);
  std::vector<double> norms;
  std::vector<double> ratios;
  Index hits = 0;
  for (Index k = 0; k < trials; ++k) {
    const SketchedData sk =
        sketch_gaussian(p.A(), m, derive_seed(seed, static_cast<std::uint64_t>(k)));
    const CsDeviation dev = meter.deviation(sk.SA);
    norms.push_back(dev.norm());
    ratios.push_back(upper > 0.0 ? dev.lambda_max / upper : 0.0);
    if (dev.lambda_max <= upper && dev.lambda_min >= lower) ++hits;
  }
  ConcentrationReport report;
  report.kind = "gaussian-deviation";
  report.family = SketchFamily::Gaussian;
  report.m = m;
  report.rho = rho;
  report.delta = delta;
  report.trials = trials;
  report.empirical_success = static_cast<double>(hits) / static_cast<double>(trials);
  fill_quantiles(report, norms);
  report.median_bound_ratio = quantile(ratios, 0.5);
  return report;
}

double srht_rownorm_bound(double d_e, Index n, double delta) {
  check_delta(delta);
  const double nn = static_cast<double>(n);
  return std::sqrt(d_e / nn) + std::sqrt(8.0 * std::log(nn / delta) / nn);
}

ConcentrationReport srht_rownorm_check(const RegularizedProblem& p, Index trials, double delta,
                                       std::uint64_t seed) {
  check_trials(trials);
  check_delta(delta);
  const Index n = p.n();
  if (!is_power_of_two(static_cast<std::size_t>(n))) {
    throw Error(Errc::NotPowerOfTwo, "n = " + std::to_string(n) + " is not a power of two");
  }
  // Row norms of U·D̄ equal those of A·H^{-1/2}/‖D‖₂, since the two differ by
  // the orthogonal factor V on the right.
  const CsMeter meter(p);
  const double D2 = d_norm_squared(p);
  if (!(D2 > 0.0)) throw Error(Errc::InvalidArgument, "A is zero; D has no scale");
  const Matrix M = (p.A() * meter.h_inv_sqrt()) / std::sqrt(D2);
  const double d_e = effective_dimension(p);
  const double bound = srht_rownorm_bound(d_e, n, delta);

  std::vector<double> maxima;
  std::vector<double> ratios;
  Index hits = 0;
  Matrix work(n, M.cols());
  for (Index k = 0; k < trials; ++k) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(k)), 0);
    for (Index i = 0; i < n; ++i) work.row(i) = rng.sign() * M.row(i);
    for (Index c = 0; c < work.cols(); ++c) {
      fwht_inplace(std::span<double>(work.col(c).data(), static_cast<std::size_t>(n)), true);
    }
    const double top = work.rowwise().norm().maxCoeff();
    maxima.push_back(top);
    ratios.push_back(top / bound);
    if (top < bound) ++hits;
  }
  ConcentrationReport report;
  report.kind = "srht-rownorm";
  report.family = SketchFamily::Srht;
  report.m = n;
  report.delta = delta;
  report.trials = trials;
  report.empirical_success = static_cast<double>(hits) / static_cast<double>(trials);
  fill_quantiles(report, maxima);
  report.median_bound_ratio = quantile(ratios, 0.5);
  return report;
}

double gaussian_width_mc(const Matrix& radii, Index samples, std::uint64_t seed) {
  if (samples < 100) throw Error(Errc::InvalidArgument, "need at least 100 samples");
  const Index d = radii.rows();
  double total = 0.0;
  Vector h(d);
  for (Index k = 0; k < samples; ++k) {
    CounterRng rng(seed, static_cast<std::uint64_t>(k));
    for (Index i = 0; i < d; ++i) h[i] = rng.normal();
    total += (radii.transpose() * h).norm();
  }
  return total / static_cast<double>(samples);
}

}  // namespace adasketch
