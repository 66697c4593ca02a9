// Acceptance suite. One line per criterion; `acceptance N` runs criterion N
// alone, no argument runs all of them. Exit status is non-zero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasketch/diagnostics.hpp"
#include "adasketch/embeddings.hpp"
#include "adasketch/preconditioner.hpp"
#include "adasketch/problem.hpp"
#include "adasketch/rng.hpp"
#include "adasketch/solvers.hpp"
#include "oracles.hpp"

using namespace adasketch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// ---------------------------------------------------------------- 1

struct TableEntry {
  double rho;
  double t;  // 0 marks the t = ∞ column
  const char* printed;
};

// Values as printed, including the two ρ = 0.01 entries whose exponents do
// not follow from the formula.
const TableEntry kTable[] = {
    {0.1, 1, "4.2e2"},    {0.1, 10, "8.3"},      {0.1, 50, "2.1e-1"},   {0.1, 100, "9.6e-2"},
    {0.1, 200, "5.7e-2"}, {0.1, 300, "4.7e-2"},  {0.1, 0, "2.6e-2"},    {0.05, 1, "7.75e2"},
    {0.05, 10, "7.2"},    {0.05, 50, "1.2e-1"},  {0.05, 100, "5.2e-2"}, {0.05, 200, "3.0e-2"},
    {0.05, 300, "2.3e-2"}, {0.05, 0, "1.2e-2"},  {0.01, 1, "3.6e4"},    {0.01, 10, "5.6"},
    {0.01, 50, "3.7e-1"}, {0.01, 100, "1.3e-2"}, {0.01, 200, "6.7e-3"}, {0.01, 300, "5.1e-3"},
    {0.01, 0, "2.5e-3"},  {0.001, 1, "3.6e4"},   {0.001, 10, "4.1"},    {0.001, 50, "6.9e-3"},
    {0.001, 100, "1.8e-3"}, {0.001, 200, "8e-4"}, {0.001, 300, "5.9e-4"}, {0.001, 0, "2.e-4"},
};

int significant_digits(const std::string& printed) {
  const std::string mantissa = printed.substr(0, printed.find('e'));
  int n = 0;
  for (char ch : mantissa) n += ch >= '0' && ch <= '9';
  return n;
}

// Integer made of the first k significant digits of v at decimal exponent e.
double scaled(double v, int e, int k) { return v / std::pow(10.0, e - k + 1); }

// Match at k = min(2, printed digits) significant figures: the computed value,
// rounded or truncated, must equal the printed value rounded to k.
bool table_match(double computed, const std::string& printed) {
  const double p = std::stod(printed);
  const int k = std::min(2, significant_digits(printed));
  const int e = static_cast<int>(std::floor(std::log10(p)));
  const double want = std::floor(scaled(p, e, k) + 0.5 + 1e-9);
  const double c = scaled(computed, e, k);
  return std::floor(c + 0.5) == want || std::floor(c) == want;
}

Outcome criterion1() {
  int finite_ok = 0, finite = 0, inf_ok = 0, inf = 0;
  std::string misses;
  for (const auto& e : kTable) {
    const double v = e.t > 0 ? heavy_ball_bound(e.t, e.rho) : pcg_rate(e.rho);
    const bool ok = table_match(v, e.printed);
    (e.t > 0 ? finite : inf) += 1;
    (e.t > 0 ? finite_ok : inf_ok) += ok;
    if (!ok) {
      misses += " rho=" + fmt(e.rho) + ",t=" + (e.t > 0 ? fmt(e.t) : std::string("inf")) +
                ": computed " + fmt(v) + " vs printed " + e.printed + ";";
    }
  }
  Outcome out;
  out.pass = finite_ok == finite && inf_ok == inf;
  out.detail = std::to_string(finite_ok) + "/" + std::to_string(finite) + " finite entries, " +
               std::to_string(inf_ok) + "/" + std::to_string(inf) + " limit entries" + misses;
  return out;
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  double worst = 0.0;
  int compared = 0, floored = 0, failures = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const RegularizedProblem p(oracle::gaussian_matrix(32, 8, 7000 + 3 * k),
                               oracle::gaussian_matrix(8, 1, 7001 + 3 * k), 1.0,
                               Diagonal::identity(8));
    const Vector x0 = Vector::Zero(8);
    for (Index m : {2, 4, 16}) {
      const Preconditioner P =
          Preconditioner::build(sketch_gaussian(p.A(), m, 100 * k + m), p.nu(), p.lambda());
      const double d0 = exact_error_extended(p, x0);
      for (Index t = 0; t <= 8; ++t) {
        const double dt = exact_error_extended(p, pcg_run(p, P, x0, t).x.col(0));
        const double lt = krylov_lower_bound(p, P, x0, t);
        const double big = std::max(dt, lt);
        if (big <= 1e-14 * d0) {
          ++floored;
          continue;
        }
        const double rel = std::abs(dt - lt) / big;
        worst = std::max(worst, rel);
        ++compared;
        if (rel > 1e-8) ++failures;
      }
    }
  }
  return {failures == 0, std::to_string(compared) + " (t, instance, m) points compared, worst rel diff " +
                             fmt(worst) + ", " + std::to_string(floored) +
                             " points at the 1e-14*delta_0 numerical-zero floor"};
}

// ---------------------------------------------------------------- 3, 4

struct CertifiedSetup {
  RegularizedProblem problem;
  ExactSolution sol;
  std::vector<Preconditioner> preconditioners;
  Index draws = 0;
};

CertifiedSetup certified_draws(double rho) {
  const Index n = 1024, d = 64;
  Vector s(d);
  for (Index j = 0; j < d; ++j) s[j] = std::pow(0.95, 2.0 * static_cast<double>(j + 1));
  const double nu = nu_for_effective_dimension(s, 20.0);
  RegularizedProblem p = gen_synthetic(n, d, 0.95, nu, 31).problem;
  const auto m = std::min<Index>(
      n, static_cast<Index>(std::ceil(critical_m_gaussian(effective_dimension(p), 0.1) / rho)));
  CertifiedSetup out{p, direct_solve(p), {}, 0};
  const CsMeter meter(p);
  for (std::uint64_t seed = 0; out.preconditioners.size() < 50 && seed < 1000; ++seed) {
    ++out.draws;
    SketchedData sk = sketch_gaussian(p.A(), m, derive_seed(31, seed));
    if (meter.deviation(sk.SA).norm() > std::sqrt(rho)) continue;
    out.preconditioners.push_back(Preconditioner::build(sk, p.nu(), p.lambda()));
  }
  return out;
}

Outcome criterion3() {
  const double rho = 0.25;
  const CertifiedSetup c = certified_draws(rho);
  int violations = 0;
  double worst = 0.0;
  for (const auto& P : c.preconditioners) {
    const auto res = ihs_run(c.problem, P, Matrix::Zero(64, 1), rho, 20, RunOptions{&c.sol});
    const auto& r = res.trace.records;
    for (std::size_t t = 1; t < r.size(); ++t) {
      const double prev = *r[t - 1].delta_exact, cur = *r[t].delta_exact;
      if (cur > rho * prev + 1e-12) ++violations;
      if (prev > 1e-20) worst = std::max(worst, cur / prev);
    }
  }
  const bool enough = c.preconditioners.size() == 50;
  return {enough && violations == 0,
          std::to_string(c.preconditioners.size()) + " certified sketches out of " +
              std::to_string(c.draws) + " draws, " + std::to_string(violations) +
              " step violations, worst step ratio " + fmt(worst) + " (rho = 0.25)"};
}

Outcome criterion4() {
  const double rho = 0.25;
  const CertifiedSetup c = certified_draws(rho);
  const double phi = pcg_rate(rho);
  int violations = 0;
  double worst = 0.0;
  for (const auto& P : c.preconditioners) {
    const auto res = pcg_run(c.problem, P, Matrix::Zero(64, 1), 20, RunOptions{&c.sol});
    const auto& r = res.trace.records;
    const double d0 = *r.front().delta_exact;
    for (const auto& rec : r) {
      const double bound = 4.0 * std::pow(phi, static_cast<double>(rec.t));
      const double ratio = *rec.delta_exact / d0;
      if (ratio > bound) ++violations;
      worst = std::max(worst, ratio / bound);
    }
  }
  const bool enough = c.preconditioners.size() == 50;
  return {enough && violations == 0,
          std::to_string(c.preconditioners.size()) + " certified sketches, " +
              std::to_string(violations) + " violations, max (delta_t/delta_0)/bound " + fmt(worst)};
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  std::mt19937_64 gen(55);
  double worst = 0.0;
  int failures = 0;
  for (int k = 0; k < 100; ++k) {
    const Index d = std::uniform_int_distribution<Index>(4, 60)(gen);
    const Index m = std::uniform_int_distribution<Index>(1, d - 1)(gen);
    const Index n = d + std::uniform_int_distribution<Index>(0, 3 * d)(gen);
    const double nu = std::uniform_real_distribution<double>(0.5, 2.0)(gen);
    const Matrix A = oracle::gaussian_matrix(n, d, gen()) / std::sqrt(static_cast<double>(n));
    const Diagonal lam(oracle::uniform_vector(d, 1.0, 5.0, gen()));
    const SketchedData sk = sketch_gaussian(A, m, gen());
    const Matrix Z = oracle::gaussian_matrix(d, 3, gen());
    const Preconditioner W = Preconditioner::build(sk, nu, lam);
    const Preconditioner C = Preconditioner::build_with_path(sk, nu, lam, FactorPath::CholeskyD);
    if (W.path() != FactorPath::WoodburyM) return {false, "m < d did not select the Woodbury path"};
    const Matrix vc = C.solve(Z);
    const double rel = (W.solve(Z) - vc).norm() / vc.norm();
    worst = std::max(worst, rel);
    if (rel > 1e-10) ++failures;
  }
  return {failures == 0, "100 instances with m < d, worst relative difference " + fmt(worst)};
}

// ---------------------------------------------------------------- 6, 7

struct Scaled {
  RegularizedProblem problem;
  ExactSolution sol;
  double d_e;
  double nu;
};

const Scaled& scaled_instance() {
  static const Scaled inst = [] {
    const Index n = 4096, d = 512;
    Vector s(d);
    for (Index j = 0; j < d; ++j) s[j] = std::pow(0.95, 2.0 * static_cast<double>(j + 1));
    const double nu = nu_for_effective_dimension(s, 50.0);
    RegularizedProblem p = gen_synthetic(n, d, 0.95, nu, 2024).problem;
    ExactSolution sol = direct_solve(p);
    const double d_e = effective_dimension(p);
    return Scaled{std::move(p), std::move(sol), d_e, nu};
  }();
  return inst;
}

double final_relative_error(const SolverTrace& trace) {
  return *trace.records.back().delta_exact / *trace.records.front().delta_exact;
}

// First accepted iteration with δ_t/δ_0 ≤ tol, or -1.
Index iterations_to(const SolverTrace& trace, double tol) {
  const double d0 = *trace.records.front().delta_exact;
  for (const auto& r : trace.records) {
    if (r.event != TraceEvent::Resketch && *r.delta_exact <= tol * d0) return r.t;
  }
  return -1;
}

Outcome criterion6() {
  const Scaled& inst = scaled_instance();
  const double rho = 0.125;
  const double m_delta = critical_m_gaussian(inst.d_e, 0.1);
  const double m_bound = 2.0 * m_delta / rho;
  const auto K_bound = static_cast<Index>(std::ceil(std::log2(m_delta / rho)));
  int within_m = 0, within_K = 0, converged = 0;
  Index max_m = 0, max_K = 0;
  double worst_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = AdaptiveConfig::for_method(Method::Pcg, rho, 1, 60, SketchFamily::Gaussian, seed);
    const auto res = adaptive_run(inst.problem, Matrix::Zero(512, 1), cfg, Method::Pcg,
                                  RunOptions{&inst.sol});
    const auto& tr = res.trace;
    within_m += static_cast<double>(tr.final_m()) <= m_bound;
    within_K += tr.resketches() <= K_bound;
    const double err = final_relative_error(tr);
    converged += err <= 1e-10 && tr.iterations() <= 60;
    max_m = std::max(max_m, tr.final_m());
    max_K = std::max(max_K, tr.resketches());
    worst_err = std::max(worst_err, err);
  }
  const bool de_ok = inst.d_e >= 45.0 && inst.d_e <= 55.0;
  return {de_ok && within_m >= 16 && within_K == 20 && converged == 20,
          "d_e = " + fmt(inst.d_e, 4) + ", m bound " + fmt(m_bound, 4) + ": " +
              std::to_string(within_m) + "/20 within (max final m " + std::to_string(max_m) +
              "), K <= " + std::to_string(K_bound) + " in " + std::to_string(within_K) +
              "/20 (max " + std::to_string(max_K) + "), rel error <= 1e-10 in " +
              std::to_string(converged) + "/20 (worst " + fmt(worst_err) + ")"};
}

Outcome criterion7() {
  const Scaled& inst = scaled_instance();
  const auto& p = inst.problem;
  const Index d = p.d();
  const Matrix x0 = Matrix::Zero(d, 1);
  const RunOptions opts{&inst.sol};
  const double tol = 1e-10;

  const auto cfg = AdaptiveConfig::for_method(Method::Pcg, 0.125, 1, 60, SketchFamily::Gaussian, 0);
  const auto ada = adaptive_run(p, x0, cfg, Method::Pcg, opts).trace;
  const auto pcg = pcg_run(p, x0, SketchSpec{SketchFamily::Gaussian, 2 * d, 1, 0}, 60, opts).trace;
  const auto plain = cg(p, x0, 1000, opts).trace;

  const Index it_ada = iterations_to(ada, tol);
  const Index it_pcg = iterations_to(pcg, tol);
  const Index it_cg = iterations_to(plain, tol);
  const bool all_reached = it_ada >= 0 && it_pcg >= 0 && it_cg >= 0;
  const bool order = all_reached && it_ada <= it_pcg && it_pcg < it_cg;
  const bool small = ada.final_m() < 2 * d;
  return {order && small,
          "iterations to 1e-10: ada-pcg " + std::to_string(it_ada) + ", pcg(m=2d) " +
              std::to_string(it_pcg) + ", cg " + std::to_string(it_cg) +
              "; adaptive final m " + std::to_string(ada.final_m()) + " vs 2d = " +
              std::to_string(2 * d) + " (m_delta/rho = " +
              fmt(critical_m_gaussian(inst.d_e, 0.1) / 0.125, 4) + ")"};
}

// ---------------------------------------------------------------- 8

RegularizedProblem synthetic_with_de(Index n, Index d, double target, std::uint64_t seed) {
  Vector s(d);
  for (Index j = 0; j < d; ++j) s[j] = std::pow(0.95, 2.0 * static_cast<double>(j + 1));
  return gen_synthetic(n, d, 0.95, nu_for_effective_dimension(s, target), seed).problem;
}

Outcome criterion8() {
  const double rho = 0.25, delta = 0.1;
  const RegularizedProblem g = synthetic_with_de(1024, 100, 20.0, 81);
  const double d_e = effective_dimension(g);
  const auto m = static_cast<Index>(std::ceil(critical_m_gaussian(d_e, delta) / rho));
  const auto gauss = gaussian_deviation_check(g, m, 200, delta, rho, 82);

  const RegularizedProblem h = synthetic_with_de(1024, 64, 20.0, 83);
  const auto srht = srht_rownorm_check(h, 200, delta, 84);
  return {gauss.empirical_success >= 0.9 && srht.empirical_success >= 0.9,
          "gaussian deviation (d_e = " + fmt(d_e, 4) + ", m = " + std::to_string(m) + "): " +
              fmt(gauss.empirical_success) + ", median lambda_max/bound " +
              fmt(gauss.median_bound_ratio) + "; srht row norm: " + fmt(srht.empirical_success) +
              ", median max-row/bound " + fmt(srht.median_bound_ratio)};
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  std::mt19937_64 gen(99);
  int count = 0, redraws = 0, fail_a = 0, fail_b = 0;
  double worst = 0.0;
  while (count < 50) {
    const Index d = std::uniform_int_distribution<Index>(3, 40)(gen);
    const Index n = 2 * d + std::uniform_int_distribution<Index>(0, 4 * d)(gen);
    const Index m = std::uniform_int_distribution<Index>(1, 3 * d)(gen);
    const double nu = std::uniform_real_distribution<double>(0.1, 2.0)(gen);
    const RegularizedProblem p(oracle::gaussian_matrix(n, d, gen()),
                               oracle::gaussian_matrix(d, 1, gen()), nu,
                               Diagonal(oracle::uniform_vector(d, 1.0, 3.0, gen())));
    const Preconditioner P = Preconditioner::build(sketch_gaussian(p.A(), m, gen()), nu, p.lambda());
    const double rho_hat = cs_deviation(P, p).norm();
    if (!(rho_hat < 1.0)) {
      ++redraws;
      continue;
    }
    ++count;
    const Vector x = oracle::gaussian_matrix(d, 1, gen()).col(0);
    const double delta = exact_error_extended(p, x);
    const double dt = approx_newton_decrement(P, p.gradient(x));
    if (std::abs(delta - dt) > rho_hat * dt + 1e-12) ++fail_a;
    if (delta > (1.0 + rho_hat) * dt) ++fail_b;
    worst = std::max(worst, std::abs(delta - dt) / (rho_hat * dt));
  }
  return {fail_a == 0 && fail_b == 0,
          "50 triples (" + std::to_string(redraws) + " redraws with rho_hat >= 1), " +
              std::to_string(fail_a) + " |delta - delta~| violations, " + std::to_string(fail_b) +
              " upper-bound violations, max |delta - delta~|/(rho_hat delta~) " + fmt(worst)};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ADASKETCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string manifest_without_time(const fs::path& p) {
  auto j = nlohmann::ordered_json::parse(slurp(p));
  j.erase("started_at");
  return j.dump();
}

// Drops the wall_seconds and setup_seconds columns, located by header name.
std::string trace_without_time(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  std::vector<bool> keep;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (keep.empty()) {
      for (const auto& h : fields) keep.push_back(h != "wall_seconds" && h != "setup_seconds");
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i < keep.size() && keep[i]) out += fields[i] + ",";
    }
    out += "\n";
  }
  return out;
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / "adasketch_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "cli.log";
  const fs::path data = root / "data";
  const std::string d = " --data " + data.string();

  struct Command {
    std::string name;
    std::string args;
    std::function<std::string()> snapshot;
  };
  const fs::path solve_out = root / "solve.csv";
  const fs::path compare_out = root / "compare.csv";
  const fs::path conc_out = root / "conc.json";
  const std::vector<Command> commands = {
      {"gen", "gen --n 1024 --d 64 --decay 0.95 --target-de 20 --seed 5 --out " + data.string(),
       [&] {
         return slurp(data / "A.adsk") + slurp(data / "B.adsk") +
                manifest_without_time(data / "manifest.json");
       }},
      {"solve", "solve --solver ada-pcg --sketch sjlt --s 2 --m-init 1 --T 20 --seed 3" + d +
                    " --out " + solve_out.string(),
       [&] {
         return trace_without_time(solve_out) +
                manifest_without_time(solve_out.string() + ".manifest.json");
       }},
      {"compare", "compare --T 15 --seed 4" + d +
                      " --run cg=cg --run pcg=pcg,m=2d --run ada=ada-ihs --run srht=ada-pcg,m-init=2"
                      " --sketch srht --out " + compare_out.string(),
       [&] {
         return trace_without_time(compare_out) +
                manifest_without_time(compare_out.string() + ".manifest.json");
       }},
      {"concentration", "concentration --check event --family sjlt --s 2 --m-grid 64,128 --trials 50 --seed 6" +
                            d + " --out " + conc_out.string(),
       [&] { return slurp(conc_out) + manifest_without_time(conc_out.string() + ".manifest.json"); }},
  };

  setenv("ADASKETCH_THREADS", "3", 1);
  std::string detail;
  bool pass = true;
  for (const auto& c : commands) {
    std::string first;
    bool same = true;
    for (int rep = 0; rep < 2; ++rep) {
      const int code = run_cli(c.args, log);
      if (code != 0) {
        return {false, c.name + " exited with " + std::to_string(code) + ": " + slurp(log)};
      }
      const std::string snap = c.snapshot();
      if (rep == 0) {
        first = snap;
      } else {
        same = snap == first;
      }
    }
    pass = pass && same;
    detail += c.name + (same ? " identical" : " DIFFERS") + "; ";
  }
  return {pass, detail};
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "heavy-ball bound table", 1.0, criterion1},
    {2, "PCG equals Krylov optimum", 10.0, criterion2},
    {3, "IHS conditional rate", 30.0, criterion3},
    {4, "PCG rate bound", 30.0, criterion4},
    {5, "Woodbury path equivalence", 10.0, criterion5},
    {6, "adaptive sketch-size bound", 300.0, criterion6},
    {7, "qualitative solver ordering", 300.0, criterion7},
    {8, "concentration Monte Carlo", 180.0, criterion8},
    {9, "Newton-decrement sandwich", 30.0, criterion9},
    {10, "CLI determinism", 60.0, criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " -- "
              << out.detail << " [" << fmt(secs, 3) << " s, limit " << fmt(c.limit_seconds, 3)
              << " s" << (in_time ? "" : ", OVER TIME") << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
