#include "adasketch/solvers.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "adasketch/errors.hpp"
#include "adasketch/rng.hpp"

namespace adasketch {

namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Monotonic clock that can be paused while exact errors are evaluated.
class Stopwatch {
 public:
  void pause() {
    if (!paused_) {
      paused_ = true;
      pause_at_ = Clock::now();
    }
  }
  void resume() {
    if (paused_) {
      paused_ = false;
      start_ += Clock::now() - pause_at_;
    }
  }
  double seconds() const {
    const auto end = paused_ ? pause_at_ : Clock::now();
    return std::chrono::duration<double>(end - start_).count();
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_ = Clock::now();
  Clock::time_point pause_at_{};
  bool paused_ = false;
};

/// Column-wise dot products ⟨X_j, Y_j⟩.
Vector column_dots(const Matrix& X, const Matrix& Y) {
  return (X.array() * Y.array()).colwise().sum().transpose();
}

void check_x0(const RegularizedProblem& p, const Matrix& x0) {
  if (x0.rows() != p.d() || x0.cols() != p.c()) {
    throw Error(Errc::DimensionMismatch, "x0 is " + std::to_string(x0.rows()) + "x" +
                                             std::to_string(x0.cols()) + ", expected " +
                                             std::to_string(p.d()) + "x" + std::to_string(p.c()));
  }
}

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw Error(Errc::InvalidArgument, "rho must lie in (0, 1), got " + std::to_string(rho));
  }
}

/// Iterative method driven by a fixed preconditioner between restarts.
class MethodState {
 public:
  explicit MethodState(const RegularizedProblem& p) : p_(p) {}
  virtual ~MethodState() = default;

  /// Resets the method at x with a new preconditioner and returns δ̃(x).
  virtual double restart(const Preconditioner& P, const Matrix& x) = 0;
  /// Computes the candidate next iterate and returns its δ̃.
  virtual double propose() = 0;
  /// Makes the candidate the current iterate.
  virtual void accept() = 0;
  virtual const Matrix& x() const = 0;

 protected:
  const RegularizedProblem& p_;
  const Preconditioner* P_ = nullptr;
};

/// IHS with optional heavy-ball momentum. Keeps H_S⁻¹∇f of the current and
/// candidate iterates so each step costs one gradient and one solve.
class HeavyBallState : public MethodState {
 public:
  HeavyBallState(const RegularizedProblem& p, MethodParams params)
      : MethodState(p), params_(params) {}

  double restart(const Preconditioner& P, const Matrix& x) override {
    P_ = &P;
    x_ = x;
    x_prev_ = x;
    const Matrix g = p_.gradient(x_);
    v_ = P.solve(g);
    return 0.5 * std::max(frobenius_dot(g, v_), 0.0);
  }

  double propose() override {
    x_next_ = x_ - params_.mu * v_;
    if (params_.beta != 0.0) x_next_ += params_.beta * (x_ - x_prev_);
    const Matrix g = p_.gradient(x_next_);
    v_next_ = P_->solve(g);
    const double q = frobenius_dot(g, v_next_);
    if (q < -1e-12 * g.squaredNorm()) {
      throw Error(Errc::NegativeValue, "gradᵀ H_S⁻¹ grad is negative");
    }
    return 0.5 * std::max(q, 0.0);
  }

  void accept() override {
    x_prev_ = std::move(x_);
    x_ = std::move(x_next_);
    v_ = std::move(v_next_);
  }

  const Matrix& x() const override { return x_; }

 private:
  MethodParams params_;
  Matrix x_, x_prev_, x_next_, v_, v_next_;
};

/// PCG with one set of scalars per right-hand side. The running scalar
/// g_j = r_jᵀr̃_j equals twice the decrement of column j.
class PcgState : public MethodState {
 public:
  explicit PcgState(const RegularizedProblem& p) : MethodState(p) {}

  double restart(const Preconditioner& P, const Matrix& x) override {
    P_ = &P;
    x_ = x;
    r_ = p_.B() - p_.hessian_times(x_);
    rt_ = P.solve(r_);
    dir_ = rt_;
    g_ = column_dots(r_, rt_);
    check_scalars(g_);
    return 0.5 * g_.sum();
  }

  double propose() override {
    const Matrix Hp = p_.hessian_times(dir_);
    const Vector pHp = column_dots(dir_, Hp);
    Vector alpha(g_.size());
    for (Index j = 0; j < g_.size(); ++j) {
      if (g_[j] == 0.0) {
        alpha[j] = 0.0;
      } else if (!(pHp[j] > 0.0)) {
        throw Error(Errc::BreakdownDetected,
                    "pᵀHp = " + std::to_string(pHp[j]) + " in column " + std::to_string(j));
      } else {
        alpha[j] = g_[j] / pHp[j];
      }
    }
    x_next_ = x_ + dir_ * alpha.asDiagonal();
    r_next_ = r_ - Hp * alpha.asDiagonal();
    rt_next_ = P_->solve(r_next_);
    g_next_ = column_dots(r_next_, rt_next_);
    check_scalars(g_next_);
    Vector beta(g_.size());
    for (Index j = 0; j < g_.size(); ++j) beta[j] = g_[j] == 0.0 ? 0.0 : g_next_[j] / g_[j];
    dir_next_ = rt_next_ + dir_ * beta.asDiagonal();
    return 0.5 * g_next_.sum();
  }

  void accept() override {
    x_ = std::move(x_next_);
    r_ = std::move(r_next_);
    rt_ = std::move(rt_next_);
    dir_ = std::move(dir_next_);
    g_ = std::move(g_next_);
  }

  const Matrix& x() const override { return x_; }

 private:
  static void check_scalars(Vector& g) {
    for (Index j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]) || g[j] < 0.0) {
        if (std::isfinite(g[j]) && g[j] > -1e-300) {
          g[j] = 0.0;
          continue;
        }
        throw Error(Errc::BreakdownDetected, "rᵀr̃ = " + std::to_string(g[j]));
      }
    }
  }

  Matrix x_, r_, rt_, dir_;
  Matrix x_next_, r_next_, rt_next_, dir_next_;
  Vector g_, g_next_;
};

std::unique_ptr<MethodState> make_state(const RegularizedProblem& p, Method method, double rho) {
  switch (method) {
    case Method::Ihs: return std::make_unique<HeavyBallState>(p, ihs_params(rho));
    case Method::Polyak: return std::make_unique<HeavyBallState>(p, polyak_params(rho));
    case Method::Pcg: return std::make_unique<PcgState>(p);
  }
  throw Error(Errc::InvalidArgument, "unknown method");
}

class TraceWriter {
 public:
  TraceWriter(const RegularizedProblem& p, const RunOptions& opts, Stopwatch& clock)
      : p_(p), opts_(opts), clock_(clock) {}

  void add(SolverTrace& trace, Index t, Index m, Index K, double delta_tilde, const Matrix& x,
           TraceEvent event, double setup_seconds) {
    TraceRecord rec;
    rec.t = t;
    rec.m_t = m;
    rec.K_t = K;
    rec.delta_tilde = delta_tilde;
    rec.wall_seconds = clock_.seconds();
    rec.setup_seconds = setup_seconds;
    rec.event = event;
    if (opts_.exact) {
      clock_.pause();
      rec.delta_exact = exact_error(p_, x, *opts_.exact);
      clock_.resume();
    }
    trace.records.push_back(rec);
  }

 private:
  const RegularizedProblem& p_;
  const RunOptions& opts_;
  Stopwatch& clock_;
};

bool tolerance_reached(const RunOptions& opts, double delta_tilde, double delta_tilde_0) {
  return opts.rel_tol > 0.0 && delta_tilde <= opts.rel_tol * delta_tilde_0;
}

SolverResult run_fixed(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x0,
                       MethodState& state, Index T, const RunOptions& opts, Stopwatch& clock,
                       double setup_seconds) {
  check_x0(p, x0);
  if (T < 0) throw Error(Errc::InvalidArgument, "T must be non-negative");
  TraceWriter writer(p, opts, clock);
  SolverResult out;
  double dt = state.restart(P, x0);
  const double dt0 = dt;
  writer.add(out.trace, 0, P.m(), 0, dt, state.x(), TraceEvent::Plain, setup_seconds);
  for (Index t = 1; t <= T; ++t) {
    if (dt == 0.0 || tolerance_reached(opts, dt, dt0)) break;
    dt = state.propose();
    state.accept();
    writer.add(out.trace, t, P.m(), 0, dt, state.x(), TraceEvent::Plain, setup_seconds);
  }
  out.x = state.x();
  return out;
}

SolverResult run_with_sketch(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                             Method method, double rho, Index T, const RunOptions& opts) {
  check_x0(p, x0);
  Stopwatch clock;
  const Preconditioner P = Preconditioner::build(sketch(p.A(), spec), p.nu(), p.lambda());
  const double setup = clock.seconds();
  auto state = make_state(p, method, rho);
  return run_fixed(p, P, x0, *state, T, opts, clock, setup);
}

SolverResult run_with_preconditioner(const RegularizedProblem& p, const Preconditioner& P,
                                     const Matrix& x0, Method method, double rho, Index T,
                                     const RunOptions& opts) {
  if (P.d() != p.d()) {
    throw Error(Errc::DimensionMismatch, "preconditioner and problem differ in d");
  }
  Stopwatch clock;
  auto state = make_state(p, method, rho);
  return run_fixed(p, P, x0, *state, T, opts, clock, 0.0);
}

}  // namespace

std::string_view to_string(TraceEvent event) {
  switch (event) {
    case TraceEvent::Plain: return "plain";
    case TraceEvent::Accepted: return "accepted";
    case TraceEvent::Resketch: return "resketch";
  }
  return "unknown";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Ihs: return "ihs";
    case Method::Pcg: return "pcg";
    case Method::Polyak: return "polyak";
  }
  return "unknown";
}

double pcg_rate(double rho) {
  check_rho(rho);
  const double root = std::sqrt(1.0 - rho);
  return (1.0 - root) / (1.0 + root);
}

MethodParams ihs_params(double rho) {
  check_rho(rho);
  return MethodParams{1.0 - rho, 0.0};
}

MethodParams polyak_params(double rho) {
  check_rho(rho);
  const double root = std::sqrt(1.0 - rho);
  return MethodParams{2.0 * (1.0 - rho) / (1.0 + root), pcg_rate(rho)};
}

SolverResult cg(const RegularizedProblem& p, const Matrix& x0, Index T, const RunOptions& opts) {
  check_x0(p, x0);
  if (T < 0) throw Error(Errc::InvalidArgument, "T must be non-negative");
  Stopwatch clock;
  TraceWriter writer(p, opts, clock);
  SolverResult out;
  Matrix x = x0;
  Matrix r = p.B() - p.hessian_times(x);
  Matrix dir = r;
  Vector g = column_dots(r, r);
  const double dt0 = 0.5 * g.sum();
  writer.add(out.trace, 0, 0, 0, dt0, x, TraceEvent::Plain, 0.0);
  for (Index t = 1; t <= T; ++t) {
    const double dt = 0.5 * g.sum();
    if (dt == 0.0 || tolerance_reached(opts, dt, dt0)) break;
    const Matrix Hp = p.hessian_times(dir);
    const Vector pHp = column_dots(dir, Hp);
    Vector alpha(g.size());
    for (Index j = 0; j < g.size(); ++j) {
      if (g[j] == 0.0) {
        alpha[j] = 0.0;
      } else if (!(pHp[j] > 0.0)) {
        throw Error(Errc::BreakdownDetected, "pᵀHp = " + std::to_string(pHp[j]));
      } else {
        alpha[j] = g[j] / pHp[j];
      }
    }
    x += dir * alpha.asDiagonal();
    r -= Hp * alpha.asDiagonal();
    const Vector g_next = column_dots(r, r);
    Vector beta(g.size());
    for (Index j = 0; j < g.size(); ++j) beta[j] = g[j] == 0.0 ? 0.0 : g_next[j] / g[j];
    dir = r + dir * beta.asDiagonal();
    g = g_next;
    writer.add(out.trace, t, 0, 0, 0.5 * g.sum(), x, TraceEvent::Plain, 0.0);
  }
  out.x = std::move(x);
  return out;
}

Matrix ihs_step(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x, double mu) {
  check_x0(p, x);
  return x - mu * P.solve(p.gradient(x));
}

SolverResult ihs_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                     double rho, Index T, const RunOptions& opts) {
  check_rho(rho);
  return run_with_sketch(p, x0, spec, Method::Ihs, rho, T, opts);
}

SolverResult ihs_run(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x0,
                     double rho, Index T, const RunOptions& opts) {
  check_rho(rho);
  return run_with_preconditioner(p, P, x0, Method::Ihs, rho, T, opts);
}

SolverResult pcg_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                     Index T, const RunOptions& opts) {
  return run_with_sketch(p, x0, spec, Method::Pcg, 0.5, T, opts);
}

SolverResult pcg_run(const RegularizedProblem& p, const Preconditioner& P, const Matrix& x0,
                     Index T, const RunOptions& opts) {
  return run_with_preconditioner(p, P, x0, Method::Pcg, 0.5, T, opts);
}

SolverResult polyak_ihs_run(const RegularizedProblem& p, const Matrix& x0, const SketchSpec& spec,
                            double rho, Index T, const RunOptions& opts) {
  check_rho(rho);
  return run_with_sketch(p, x0, spec, Method::Polyak, rho, T, opts);
}

SolverResult polyak_ihs_run(const RegularizedProblem& p, const Preconditioner& P,
                            const Matrix& x0, double rho, Index T, const RunOptions& opts) {
  check_rho(rho);
  return run_with_preconditioner(p, P, x0, Method::Polyak, rho, T, opts);
}

HeavyBallTerms heavy_ball_terms(double t, double rho) {
  check_rho(rho);
  if (!(t >= 1.0)) throw Error(Errc::InvalidArgument, "t must be at least 1");
  const double beta = pcg_rate(rho);
  const double nu_t = std::log2(t) + 1.0;
  const double omega_t = t - 2.0 * nu_t;
  const double log_alpha =
      nu_t * (nu_t + 1.0) * std::log(3.0) + 2.0 * nu_t * std::log1p(4.0 * beta + beta * beta);
  return HeavyBallTerms{nu_t, omega_t, log_alpha, std::log(beta)};
}

double heavy_ball_bound(double t, double rho) {
  const HeavyBallTerms h = heavy_ball_terms(t, rho);
  return std::exp((h.log_alpha + h.omega_t * h.log_beta) / t);
}

namespace {

struct ExtendedSystem {
  LMatrix H;
  LVector x_star;
};

ExtendedSystem extended_system(const RegularizedProblem& p) {
  if (p.c() != 1) {
    throw Error(Errc::InvalidArgument, "extended-precision reference needs a single right-hand side");
  }
  const LMatrix A = p.A().cast<long double>();
  const long double nu = p.nu();
  LMatrix H = A.transpose() * A;
  H.diagonal() += nu * nu * p.lambda().entries().cast<long double>();
  Eigen::LLT<LMatrix> llt(H);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::NotPositiveDefinite, "H is not positive definite");
  }
  LVector x_star = llt.solve(p.B().col(0).cast<long double>());
  return ExtendedSystem{std::move(H), std::move(x_star)};
}

}  // namespace

double exact_error_extended(const RegularizedProblem& p, const Vector& x) {
  if (x.size() != p.d()) throw Error(Errc::DimensionMismatch, "iterate has the wrong length");
  const ExtendedSystem sys = extended_system(p);
  const LVector diff = x.cast<long double>() - sys.x_star;
  return static_cast<double>(0.5L * diff.dot(sys.H * diff));
}

double krylov_lower_bound(const RegularizedProblem& p, const Preconditioner& P, const Vector& x0,
                          Index t) {
  if (t < 0) throw Error(Errc::InvalidArgument, "t must be non-negative");
  if (P.d() != p.d() || x0.size() != p.d()) {
    throw Error(Errc::DimensionMismatch, "problem, preconditioner and x0 differ in d");
  }
  const Index d = p.d();
  const ExtendedSystem sys = extended_system(p);

  Eigen::SelfAdjointEigenSolver<LMatrix> h_eig(sys.H);
  if (h_eig.info() != Eigen::Success) {
    throw Error(Errc::ConvergenceFailure, "eigensolver failed on H");
  }
  const LVector root = h_eig.eigenvalues().cwiseSqrt();
  const LMatrix& Q = h_eig.eigenvectors();
  const LMatrix h_sqrt = Q * root.asDiagonal() * Q.transpose();
  const LMatrix h_inv_sqrt = Q * root.cwiseInverse().asDiagonal() * Q.transpose();

  const LMatrix SA = P.SA().cast<long double>();
  LMatrix H_S = SA.transpose() * SA;
  H_S.diagonal() += static_cast<long double>(p.nu() * p.nu()) *
                    p.lambda().entries().cast<long double>();
  LMatrix C = h_inv_sqrt * H_S * h_inv_sqrt;
  C = (0.5L * (C + C.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<LMatrix> c_eig(C);
  if (c_eig.info() != Eigen::Success) {
    throw Error(Errc::ConvergenceFailure, "eigensolver failed on C_S");
  }
  const LVector inv_lambda = c_eig.eigenvalues().cwiseInverse();
  const LVector xi = c_eig.eigenvectors().transpose() *
                     (h_sqrt * (x0.cast<long double>() - sys.x_star));

  if (t == 0) return static_cast<double>(0.5L * xi.squaredNorm());
  if (t >= d) return 0.0;

  // Orthonormal basis of span{Mξ, ..., M^t ξ} with M = diag(1/λ_i), built by
  // Arnoldi with two Gram-Schmidt passes; ℓ is half the squared distance
  // from ξ to that span.
  std::vector<LVector> basis;
  LVector v = inv_lambda.cwiseProduct(xi);
  const long double start_norm = v.norm();
  if (start_norm == 0.0L) return 0.0;
  for (Index k = 0; k < t; ++k) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const LVector& q : basis) v -= q.dot(v) * q;
    }
    const long double nv = v.norm();
    if (nv <= 1e-15L * start_norm) break;  // Krylov space became invariant
    basis.push_back(v / nv);
    v = inv_lambda.cwiseProduct(basis.back());
  }
  LVector residual = xi;
  for (int pass = 0; pass < 2; ++pass) {
    for (const LVector& q : basis) residual -= q.dot(residual) * q;
  }
  return static_cast<double>(0.5L * residual.squaredNorm());
}

double c_alpha_rho(double alpha, double rho) {
  check_rho(rho);
  const double root = std::sqrt(rho);
  return (1.0 + root) / (1.0 - root) * alpha;
}

AdaptiveConfig AdaptiveConfig::for_method(Method method, double rho, Index m_init, Index T,
                                          SketchFamily family, std::uint64_t seed) {
  check_rho(rho);
  if (m_init < 1) throw Error(Errc::InvalidArgument, "m_init must be at least 1");
  if (T < 0) throw Error(Errc::InvalidArgument, "T must be non-negative");
  AdaptiveConfig cfg;
  cfg.rho = rho;
  cfg.m_init = m_init;
  cfg.T = T;
  cfg.family = family;
  cfg.seed = seed;
  cfg.rho_warning = rho >= 0.25;
  switch (method) {
    case Method::Ihs:
      cfg.alpha = 1.0;
      cfg.phi_rho = rho;
      break;
    case Method::Pcg:
      cfg.alpha = 4.0;
      cfg.phi_rho = pcg_rate(rho);
      break;
    case Method::Polyak:
      // The constant depends on the segment length; alpha here is only the
      // t = 1 value and the loop recomputes it per step.
      cfg.alpha = std::exp(heavy_ball_terms(1.0, rho).log_alpha);
      cfg.phi_rho = pcg_rate(rho);
      cfg.experimental = true;
      break;
  }
  cfg.c_alpha_rho = adasketch::c_alpha_rho(cfg.alpha, rho);
  return cfg;
}

SolverResult adaptive_run(const RegularizedProblem& p, const Matrix& x0, const AdaptiveConfig& cfg,
                          Method method, const RunOptions& opts) {
  check_x0(p, x0);
  check_rho(cfg.rho);
  if (cfg.m_init < 1) throw Error(Errc::InvalidArgument, "m_init must be at least 1");
  if (cfg.T < 0) throw Error(Errc::InvalidArgument, "T must be non-negative");
  if (method == Method::Polyak && !cfg.experimental) {
    throw Error(Errc::InvalidArgument, "adaptive Polyak-IHS is experimental and must be enabled");
  }
  if (std::abs(cfg.c_alpha_rho - adasketch::c_alpha_rho(cfg.alpha, cfg.rho)) >
      1e-12 * std::max(1.0, cfg.c_alpha_rho)) {
    throw Error(Errc::InvalidArgument, "c_alpha_rho is inconsistent with alpha and rho");
  }

  const double root = std::sqrt(cfg.rho);
  const double polyak_factor = (1.0 + root) / (1.0 - root);
  auto threshold = [&](Index k) {
    if (method == Method::Polyak) {
      const HeavyBallTerms h = heavy_ball_terms(static_cast<double>(k), cfg.rho);
      return polyak_factor * std::exp(h.log_alpha + h.omega_t * h.log_beta);
    }
    return cfg.c_alpha_rho * std::pow(cfg.phi_rho, static_cast<double>(k));
  };

  const Index cap = max_sketch_rows(cfg.family, p.n());
  Stopwatch clock;
  TraceWriter writer(p, opts, clock);
  double setup = 0.0;
  auto build = [&](Index m, Index K) {
    const double before = clock.seconds();
    SketchSpec spec{cfg.family, m, std::min(cfg.s, m), derive_seed(cfg.seed, K)};
    auto P = std::make_unique<Preconditioner>(
        Preconditioner::build(sketch(p.A(), spec), p.nu(), p.lambda()));
    setup += clock.seconds() - before;
    return P;
  };

  Index m = std::min(cfg.m_init, cap);
  Index K = 0;
  Index I = 0;
  Index t = 0;
  auto P = build(m, K);
  auto state = make_state(p, method, cfg.rho);
  double dt_I = state->restart(*P, x0);
  double dt = dt_I;
  const double dt0 = dt_I;

  SolverResult out;
  writer.add(out.trace, 0, m, 0, dt, state->x(), TraceEvent::Plain, setup);
  while (t < cfg.T) {
    if (dt == 0.0 || tolerance_reached(opts, dt, dt0)) break;
    const double candidate = state->propose();
    const bool passed = candidate / dt_I <= threshold(t + 1 - I);
    if (!passed && m < cap) {
      I = t;
      m = std::min(2 * m, cap);
      ++K;
      P = build(m, K);
      dt_I = state->restart(*P, state->x());
      dt = dt_I;
      writer.add(out.trace, t, m, K, dt, state->x(), TraceEvent::Resketch, setup);
      continue;
    }
    if (!passed) ++out.trace.forced_accepts;
    state->accept();
    dt = candidate;
    ++t;
    writer.add(out.trace, t, m, K, dt, state->x(), TraceEvent::Accepted, setup);
  }
  out.x = state->x();
  return out;
}

bool termination_check(double delta_tilde, double eps, double m_delta) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be positive");
  return delta_tilde <= eps / (m_delta + 1.0);
}

}  // namespace adasketch
