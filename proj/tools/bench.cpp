#include "bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "adasketch/diagnostics.hpp"
#include "adasketch/errors.hpp"

namespace adasketch::bench {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LabelMode parse_label_mode(const std::string& mode) {
  if (mode == "class") return LabelMode::Class;
  if (mode == "real") return LabelMode::Real;
  if (mode == "none") return LabelMode::None;
  throw FlagError("--label-mode must be class, real or none");
}

bool is_adaptive(const std::string& solver) { return solver.rfind("ada-", 0) == 0; }

bool uses_fixed_sketch(const std::string& solver) {
  return solver == "ihs" || solver == "pcg" || solver == "polyak-ihs";
}

const std::set<std::string>& known_solvers() {
  static const std::set<std::string> names = {"direct",     "cg",      "ihs",     "pcg",
                                              "polyak-ihs", "ada-ihs", "ada-pcg", "ada-polyak"};
  return names;
}

json settings_json(const RunSettings& s) {
  json j;
  j["sketch"] = std::string(to_string(s.family));
  j["s"] = s.s;
  j["rho"] = s.rho;
  j["T"] = s.T;
  j["tol"] = s.tol;
  j["seed"] = s.seed;
  j["exact_cap"] = s.exact_cap;
  j["experimental"] = s.experimental;
  return j;
}

json choice_json(const SolverChoice& c) {
  json j;
  j["label"] = c.label;
  j["solver"] = c.solver;
  if (c.m) j["m"] = *c.m;
  if (c.m_init) j["m_init"] = *c.m_init;
  return j;
}

std::optional<ExactSolution> exact_if_affordable(const RegularizedProblem& p,
                                                 const RunSettings& settings) {
  if (p.d() > settings.exact_cap) return std::nullopt;
  return direct_solve(p);
}

}  // namespace

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::InvalidDecay:
    case Errc::InvalidSparsity:
    case Errc::InvalidProbability:
    case Errc::SketchTooLarge:
    case Errc::NotPowerOfTwo:
      return kExitFlag;
    case Errc::DimensionMismatch:
    case Errc::MalformedCsv:
    case Errc::NonNumericField:
    case Errc::IoError:
      return kExitData;
    case Errc::NotPositiveDefinite:
    case Errc::ConvergenceFailure:
    case Errc::NegativeValue:
    case Errc::BreakdownDetected:
      return kExitNumerical;
  }
  return kExitNumerical;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(Errc::IoError, "SHA-256 unavailable");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

json make_manifest(const std::string& command, json config, std::uint64_t seed,
                   const std::map<std::string, std::string>& input_digests) {
  json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["artifact_version"] = kArtifactVersion;
  j["seed"] = seed;
  j["started_at"] = utc_timestamp();
  json digests = json::object();
  for (const auto& [name, hex] : input_digests) digests[name] = "sha256:" + hex;
  j["input_digests"] = std::move(digests);
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Index parse_sketch_size(const std::string& text, Index d) {
  if (text.empty()) throw FlagError("empty sketch size");
  std::string digits = text;
  Index factor = 1;
  if (text.back() == 'd') {
    digits = text.substr(0, text.size() - 1);
    factor = d;
    if (digits.empty()) return d;
  }
  long long value = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || value < 1) {
    throw FlagError("sketch size must be a positive integer or '<k>d', got '" + text + "'");
  }
  return static_cast<Index>(value) * factor;
}

LoadedData load_data(const DataOptions& opts) {
  if (opts.dir.has_value() == opts.csv.has_value()) {
    throw FlagError("exactly one of --data and --csv is required");
  }
  std::map<std::string, std::string> digests;
  json source;
  Matrix A;
  Matrix B;
  double nu = 0.0;
  if (opts.dir) {
    const fs::path a_path = *opts.dir / "A.adsk";
    const fs::path b_path = *opts.dir / "B.adsk";
    A = read_adsk(a_path);
    B = read_adsk(b_path);
    digests["A.adsk"] = sha256_file(a_path);
    digests["B.adsk"] = sha256_file(b_path);
    if (opts.nu) {
      nu = *opts.nu;
    } else {
      const fs::path m_path = *opts.dir / "manifest.json";
      std::ifstream in(m_path);
      if (!in) throw Error(Errc::IoError, "cannot open " + m_path.string() + " (or pass --nu)");
      const json manifest = json::parse(in, nullptr, false);
      if (manifest.is_discarded() || !manifest.contains("config") ||
          !manifest["config"].contains("nu")) {
        throw Error(Errc::IoError, m_path.string() + " does not record nu");
      }
      nu = manifest["config"]["nu"].get<double>();
      digests["manifest.json"] = sha256_file(m_path);
    }
    source["data"] = opts.dir->string();
    source["nu"] = nu;
    const Index d = A.cols();
    return LoadedData{RegularizedProblem(std::move(A), std::move(B), nu, Diagonal::identity(d)),
                      digests, source};
  }
  const Dataset ds = load_csv(*opts.csv, parse_label_mode(opts.label_mode));
  digests[opts.csv->filename().string()] = sha256_file(*opts.csv);
  if (ds.targets.cols() == 0) throw FlagError("--label-mode none leaves nothing to fit");
  Matrix features = ds.features;
  if (opts.rff_gamma > 0.0) {
    if (opts.rff_dim < 1) throw FlagError("--rff-dim must be positive with --rff-gamma");
    features = random_features(features, opts.rff_gamma, opts.rff_dim, opts.rff_seed);
  }
  if (!(opts.lambda_reg > 0.0)) throw FlagError("--lambda-reg must be positive");
  source["csv"] = opts.csv->string();
  source["label_mode"] = opts.label_mode;
  source["lambda_reg"] = opts.lambda_reg;
  source["rff_gamma"] = opts.rff_gamma;
  source["rff_dim"] = opts.rff_dim;
  source["rff_seed"] = opts.rff_seed;
  return LoadedData{from_ridge(features, ds.targets, opts.lambda_reg), digests, source};
}

void cmd_gen(const GenOptions& opts) {
  if (opts.d < 1 || opts.n < opts.d) throw FlagError("need --n >= --d >= 1");
  if (!(opts.decay > 0.0 && opts.decay < 1.0)) throw FlagError("--decay must lie in (0, 1)");
  if (opts.c < 1) throw FlagError("--c must be at least 1");
  if (opts.nu.has_value() == opts.target_de.has_value()) {
    throw FlagError("exactly one of --nu and --target-de is required");
  }
  double nu = 0.0;
  if (opts.nu) {
    if (!(*opts.nu > 0.0)) throw FlagError("--nu must be positive");
    nu = *opts.nu;
  } else {
    Vector s(opts.d);
    for (Index j = 0; j < opts.d; ++j) s[j] = std::pow(opts.decay, 2.0 * static_cast<double>(j + 1));
    nu = nu_for_effective_dimension(s, *opts.target_de);
  }
  const SyntheticProblem syn = gen_synthetic(opts.n, opts.d, opts.decay, nu, opts.seed, opts.c);
  fs::create_directories(opts.out);
  write_adsk(opts.out / "A.adsk", syn.problem.A());
  write_adsk(opts.out / "B.adsk", syn.problem.B());

  json config;
  config["n"] = opts.n;
  config["d"] = opts.d;
  config["c"] = opts.c;
  config["decay"] = opts.decay;
  config["nu"] = nu;
  if (opts.target_de) config["target_de"] = *opts.target_de;
  config["effective_dimension"] = effective_dimension(syn.problem);
  config["lambda"] = "identity";
  json manifest = make_manifest("gen", config, opts.seed, {});
  manifest["output_digests"] = {{"A.adsk", "sha256:" + sha256_file(opts.out / "A.adsk")},
                                {"B.adsk", "sha256:" + sha256_file(opts.out / "B.adsk")}};
  write_json(opts.out / "manifest.json", manifest);
}

void validate_choice(const SolverChoice& choice, const RunSettings& settings) {
  if (!known_solvers().count(choice.solver)) {
    throw FlagError("unknown solver '" + choice.solver + "'");
  }
  if (is_adaptive(choice.solver) && choice.m) {
    throw FlagError(choice.solver + " chooses its own sketch size: use --m-init, not --m");
  }
  if (!is_adaptive(choice.solver) && choice.m_init) {
    throw FlagError(choice.solver + " does not adapt its sketch size: --m-init applies to ada-* "
                                    "solvers only (use --m)");
  }
  if ((choice.solver == "direct" || choice.solver == "cg") && choice.m) {
    throw FlagError(choice.solver + " does not sketch: --m does not apply");
  }
  if (choice.solver == "ada-polyak" && !settings.experimental) {
    throw FlagError("ada-polyak is experimental: pass --experimental");
  }
  if (!(settings.rho > 0.0 && settings.rho < 1.0)) throw FlagError("--rho must lie in (0, 1)");
  if (settings.T < 0) throw FlagError("--T must be non-negative");
  if (settings.s < 1) throw FlagError("--s must be at least 1");
  if (settings.tol < 0.0) throw FlagError("--tol must be non-negative");
}

TraceTable run_solver(const RegularizedProblem& p, const SolverChoice& choice,
                      const RunSettings& settings, const ExactSolution* exact) {
  validate_choice(choice, settings);
  RunOptions opts;
  opts.exact = exact;
  opts.rel_tol = settings.tol;
  const Matrix x0 = Matrix::Zero(p.d(), p.c());
  TraceTable table;
  table.exact = exact != nullptr;

  if (choice.solver == "direct") {
    const auto start = std::chrono::steady_clock::now();
    const CholeskyFactor L = cholesky(p.hessian());
    const double setup =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Matrix x = L.solve(p.B());
    TraceRecord rec;
    rec.t = 0;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.setup_seconds = setup;
    rec.delta_tilde = 0.5 * p.gradient(x).squaredNorm();
    if (exact) rec.delta_exact = exact_error(p, x, *exact);
    rec.t = 1;
    // Single row; the x0 reference values still define rel_error.
    table.delta_tilde_0 = 0.5 * p.gradient(x0).squaredNorm();
    if (exact) table.delta_exact_0 = exact_error(p, x0, *exact);
    table.trace.records = {rec};
    return table;
  }
  if (choice.solver == "cg") {
    table.trace = cg(p, x0, settings.T, opts).trace;
    return table;
  }
  if (uses_fixed_sketch(choice.solver)) {
    const Index cap = max_sketch_rows(settings.family, p.n());
    const Index m = parse_sketch_size(choice.m.value_or("2d"), p.d());
    if (m > cap) {
      throw FlagError("--m = " + std::to_string(m) + " exceeds the largest sketch size " +
                      std::to_string(cap) + " for this family");
    }
    const SketchSpec spec{settings.family, m, std::min(settings.s, m), settings.seed};
    if (choice.solver == "ihs") {
      table.trace = ihs_run(p, x0, spec, settings.rho, settings.T, opts).trace;
    } else if (choice.solver == "pcg") {
      table.trace = pcg_run(p, x0, spec, settings.T, opts).trace;
    } else {
      table.trace = polyak_ihs_run(p, x0, spec, settings.rho, settings.T, opts).trace;
    }
    return table;
  }
  const Method method = choice.solver == "ada-ihs"   ? Method::Ihs
                        : choice.solver == "ada-pcg" ? Method::Pcg
                                                     : Method::Polyak;
  AdaptiveConfig cfg = AdaptiveConfig::for_method(method, settings.rho, choice.m_init.value_or(1),
                                                  settings.T, settings.family, settings.seed);
  cfg.s = settings.s;
  table.trace = adaptive_run(p, x0, cfg, method, opts).trace;
  return table;
}

void write_trace_rows(std::ostream& out, const TraceTable& table,
                      const std::optional<std::string>& label) {
  const auto& recs = table.trace.records;
  if (recs.empty()) return;
  const double dt0 = table.delta_tilde_0.value_or(recs.front().delta_tilde);
  const std::optional<double> d0 =
      table.delta_exact_0 ? table.delta_exact_0 : recs.front().delta_exact;
  for (const TraceRecord& r : recs) {
    if (label) out << *label << ',';
    out << r.t << ',' << r.m_t << ',' << r.K_t << ',' << format_double(r.delta_tilde) << ',';
    if (r.delta_exact) out << format_double(*r.delta_exact);
    out << ',';
    if (table.exact && r.delta_exact && d0) {
      out << format_double(*d0 > 0.0 ? *r.delta_exact / *d0 : 0.0) << ",exact";
    } else {
      out << format_double(dt0 > 0.0 ? r.delta_tilde / dt0 : 0.0) << ",proxy";
    }
    out << ',' << format_double(r.wall_seconds) << ',' << format_double(r.setup_seconds) << ','
        << to_string(r.event) << '\n';
  }
}

void cmd_solve(const SolveOptions& opts) {
  validate_choice(opts.choice, opts.settings);
  const LoadedData data = load_data(opts.data);
  const auto exact = exact_if_affordable(data.problem, opts.settings);
  const TraceTable table =
      run_solver(data.problem, opts.choice, opts.settings, exact ? &*exact : nullptr);

  std::ofstream out(opts.out);
  if (!out) throw Error(Errc::IoError, "cannot write " + opts.out.string());
  out << kTraceHeader << '\n';
  write_trace_rows(out, table, std::nullopt);
  if (!out) throw Error(Errc::IoError, "write failed for " + opts.out.string());

  json config = settings_json(opts.settings);
  config["solver"] = choice_json(opts.choice);
  config["source"] = data.source;
  config["rows"] = table.trace.records.size();
  write_json(fs::path(opts.out.string() + ".manifest.json"),
             make_manifest("solve", config, opts.settings.seed, data.digests));
}

SolverChoice parse_run_spec(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw FlagError("--run expects LABEL=SOLVER[,m=..][,m-init=..], got '" + spec + "'");
  }
  SolverChoice choice;
  choice.label = spec.substr(0, eq);
  std::stringstream rest(spec.substr(eq + 1));
  std::string item;
  bool first = true;
  while (std::getline(rest, item, ',')) {
    if (first) {
      choice.solver = item;
      first = false;
      continue;
    }
    const auto kv = item.find('=');
    if (kv == std::string::npos) throw FlagError("bad option '" + item + "' in --run " + spec);
    const std::string key = item.substr(0, kv);
    const std::string value = item.substr(kv + 1);
    if (key == "m") {
      choice.m = value;
    } else if (key == "m-init") {
      long long v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size() || v < 1) {
        throw FlagError("m-init must be a positive integer in --run " + spec);
      }
      choice.m_init = static_cast<Index>(v);
    } else {
      throw FlagError("unknown option '" + key + "' in --run " + spec);
    }
  }
  if (choice.solver.empty()) throw FlagError("missing solver in --run " + spec);
  return choice;
}

void cmd_compare(const CompareOptions& opts) {
  if (opts.runs.empty()) throw FlagError("compare needs at least one --run");
  std::set<std::string> labels;
  for (const SolverChoice& c : opts.runs) {
    if (!labels.insert(c.label).second) throw FlagError("duplicate label '" + c.label + "'");
    validate_choice(c, opts.settings);
  }
  const LoadedData data = load_data(opts.data);
  const auto exact = exact_if_affordable(data.problem, opts.settings);
  const ExactSolution* exact_ptr = exact ? &*exact : nullptr;

  // Every run sees the same problem and seed; jobs are independent so they
  // may run side by side, and results are written in the order given.
  std::vector<std::optional<TraceTable>> tables(opts.runs.size());
  std::vector<std::exception_ptr> failures(opts.runs.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(1, opts.threads)),
                            opts.runs.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&]() {
    for (;;) {
      std::size_t job = 0;
      {
        std::lock_guard<std::mutex> guard(lock);
        if (next >= opts.runs.size()) return;
        job = next++;
      }
      try {
        tables[job] = run_solver(data.problem, opts.runs[job], opts.settings, exact_ptr);
      } catch (...) {
        failures[job] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::ofstream out(opts.out);
  if (!out) throw Error(Errc::IoError, "cannot write " + opts.out.string());
  out << "solver," << kTraceHeader << '\n';
  json per_run = json::array();
  for (std::size_t i = 0; i < opts.runs.size(); ++i) {
    write_trace_rows(out, *tables[i], opts.runs[i].label);
    json r = choice_json(opts.runs[i]);
    r["rows"] = tables[i]->trace.records.size();
    per_run.push_back(std::move(r));
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + opts.out.string());

  json config = settings_json(opts.settings);
  config["runs"] = std::move(per_run);
  config["source"] = data.source;
  write_json(fs::path(opts.out.string() + ".manifest.json"),
             make_manifest("compare", config, opts.settings.seed, data.digests));
}

void cmd_concentration(const ConcentrationOptions& opts) {
  if (opts.check != "event" && opts.check != "gaussian-deviation" &&
      opts.check != "srht-rownorm") {
    throw FlagError("--check must be event, gaussian-deviation or srht-rownorm");
  }
  if (opts.check != "srht-rownorm" && opts.m_grid.empty()) {
    throw FlagError("--m-grid is required for this check");
  }
  if (opts.trials < kMinTrials) {
    throw FlagError("--trials must be at least " + std::to_string(kMinTrials));
  }
  for (Index m : opts.m_grid) {
    if (m < 1) throw FlagError("--m-grid entries must be positive");
  }
  const LoadedData data = load_data(opts.data);
  const RegularizedProblem& p = data.problem;

  json reports = json::array();
  auto add = [&](const ConcentrationReport& r) { reports.push_back(json::parse(to_json(r))); };
  if (opts.check == "srht-rownorm") {
    add(srht_rownorm_check(p, opts.trials, opts.delta, opts.seed));
  } else {
    for (Index m : opts.m_grid) {
      if (opts.check == "event") {
        ConcentrationReport r =
            estimate_event_probability(p, opts.family, m, opts.rho, opts.trials, opts.seed, opts.s);
        r.delta = opts.delta;
        add(r);
      } else {
        add(gaussian_deviation_check(p, m, opts.trials, opts.delta, opts.rho, opts.seed));
      }
    }
  }
  write_json(opts.out, reports);

  json config;
  config["check"] = opts.check;
  config["family"] = std::string(to_string(opts.family));
  config["s"] = opts.s;
  config["m_grid"] = opts.m_grid;
  config["rho"] = opts.rho;
  config["delta"] = opts.delta;
  config["trials"] = opts.trials;
  config["source"] = data.source;
  write_json(fs::path(opts.out.string() + ".manifest.json"),
             make_manifest("concentration", config, opts.seed, data.digests));
}

Index thread_limit() {
  const char* env = std::getenv("ADASKETCH_THREADS");
  if (!env) return 1;
  long long v = 0;
  const std::string_view text(env);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || v < 1) return 1;
  return static_cast<Index>(v);
}

}  // namespace adasketch::bench
