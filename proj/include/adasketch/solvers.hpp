#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "adasketch/embeddings.hpp"
#include "adasketch/preconditioner.hpp"
#include "adasketch/problem.hpp"

namespace adasketch {

enum class TraceEvent { Plain, Accepted, Resketch };

std::string_view to_string(TraceEvent event);

struct TraceRecord {
  Index t = 0;
  Index m_t = 0;
  Index K_t = 0;
  double delta_tilde = 0.0;
  std::optional<double> delta_exact;
  double wall_seconds = 0.0;   // cumulative solver time, setup included
  double setup_seconds = 0.0;  // cumulative sketching + factorization time
  TraceEvent event = TraceEvent::Plain;
};

struct SolverTrace {
  std::vector<TraceRecord> records;
  /// Candidates accepted although the test failed, because m was already at its cap.
  Index forced_accepts = 0;

  Index iterations() const { return records.empty() ? 0 : records.back().t; }
  Index resketches() const { return records.empty() ? 0 : records.back().K_t; }
  Index final_m() const { return records.empty() ? 0 : records.back().m_t; }
};

struct SolverResult {
  Matrix x;
  SolverTrace trace;
};

struct RunOptions {
  /// When set, every record carries the exact error δ_t.
  const ExactSolution* exact = nullptr;
  /// Stop once δ̃_t ≤ rel_tol·δ̃_0. Zero disables the check.
  double rel_tol = 0.0;
};

struct MethodParams {
  double mu = 1.0;
  double beta = 0.0;
};

/// φ(ρ) = (1 − √(1−ρ))/(1 + √(1−ρ)), the PCG rate and the heavy-ball momentum.
double pcg_rate(double rho);
MethodParams ihs_params(double rho);
MethodParams polyak_params(double rho);

/// Unpreconditioned CG on HX = B, column by column. delta_tilde holds ½‖r‖².
SolverResult cg(const RegularizedProblem& p, const Matrix& x0, Index T, const RunOptions& opts = {});

/// X − μ H_S⁻¹ ∇f(X).
Matrix ihs_step(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x, double mu);

SolverResult ihs_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                     double rho, Index T, const RunOptions& opts = {});
SolverResult ihs_run(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x0,
                     double rho, Index T, const RunOptions& opts = {});

SolverResult pcg_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                     Index T, const RunOptions& opts = {});
SolverResult pcg_run(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x0,
                     Index T, const RunOptions& opts = {});

SolverResult polyak_ihs_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                            double rho, Index T, const RunOptions& opts = {});
SolverResult polyak_ihs_run(const RegularizedProblem& p, const Preconditioner& P,
                            const Matrix& x0, double rho, Index T, const RunOptions& opts = {});

/// Pieces of the finite-time heavy-ball bound, all in log space.
struct HeavyBallTerms {
  double nu_t;       // log2(t) + 1
  double omega_t;    // t − 2ν(t)
  double log_alpha;  // log α(t, ρ)
  double log_beta;   // log β_ρ
};
HeavyBallTerms heavy_ball_terms(double t, double rho);

/// (α(t,ρ)·β_ρ^{ω(t)})^{1/t}.
double heavy_ball_bound(double t, double rho);

/// ½ min Σ Q(λ_i⁻¹)² ξ_i² over polynomials of degree at most t with Q(0) = 1,
/// where λ_i, v_i are eigenpairs of C_S and ξ_i = ⟨v_i, H^{1/2}(x0 − x*)⟩.
/// Single right-hand side only. Everything, x* included, is computed in
/// extended precision so the value can serve as a reference for PCG.
double krylov_lower_bound(const RegularizedProblem& p, const Preconditioner& P, const Vector& x0,
                          Index t);

/// δ = ½‖x − x*‖²_H with x* and the quadratic form evaluated in extended
/// precision. Single right-hand side only.
double exact_error_extended(const RegularizedProblem& p, const Vector& x);

enum class Method { Ihs, Pcg, Polyak };

std::string_view to_string(Method method);

struct AdaptiveConfig {
  double rho = 0.125;
  Index m_init = 1;
  Index T = 50;
  SketchFamily family = SketchFamily::Gaussian;
  Index s = 1;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double phi_rho = 0.125;
  double c_alpha_rho = 0.0;
  /// Set when ρ ≥ 1/4, outside the range covered by the sketch-size guarantee.
  bool rho_warning = false;
  /// Must be set to run the Polyak variant.
  bool experimental = false;

  /// Fills (α, φ(ρ), c(α,ρ)) for the method: IHS (1, ρ), PCG (4, φ(ρ)).
  /// Polyak takes β_ρ as φ and a segment-length dependent constant.
  static AdaptiveConfig for_method(Method method, double rho, Index m_init, Index T,
                                   SketchFamily family, std::uint64_t seed);
};

/// ((1 + √ρ)/(1 − √ρ))·α
double c_alpha_rho(double alpha, double rho);

/// Adaptive sketch-size loop. A candidate is tested against the threshold
/// c(α,ρ)·φ^{t+1−I}; on failure m doubles (up to max_sketch_rows), a fresh
/// embedding is drawn and the method restarts from x_t without advancing t.
SolverResult adaptive_run(const RegularizedProblem& p, const Matrix& x0, const AdaptiveConfig& cfg,
                          Method method, const RunOptions& opts = {});

/// δ̃ ≤ ε/(m_δ + 1).
bool termination_check(double delta_tilde, double eps, double m_delta);

}  // namespace adasketch
