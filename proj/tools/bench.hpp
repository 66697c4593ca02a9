#pragma once

// Command implementations behind the adasketch executable. Kept in a library
// so tests can drive them without spawning processes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasketch/embeddings.hpp"
#include "adasketch/errors.hpp"
#include "adasketch/io.hpp"
#include "adasketch/problem.hpp"
#include "adasketch/solvers.hpp"

namespace adasketch::bench {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Bad or conflicting command-line input. Maps to exit code 2.
class FlagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { kExitOk = 0, kExitFlag = 2, kExitData = 3, kExitNumerical = 4 };

/// Exit code for a library error category.
int exit_code_for(Errc code);

std::string sha256_file(const std::filesystem::path& path);

nlohmann::ordered_json make_manifest(const std::string& command, nlohmann::ordered_json config,
                                     std::uint64_t seed,
                                     const std::map<std::string, std::string>& input_digests);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

/// "512" → 512, "2d" → 2·d, "d" → d.
Index parse_sketch_size(const std::string& text, Index d);

struct DataOptions {
  std::optional<std::filesystem::path> dir;  // A.adsk, B.adsk, manifest.json from `gen`
  std::optional<std::filesystem::path> csv;
  std::string label_mode = "class";
  double lambda_reg = 1e-2;
  std::optional<double> nu;  // overrides the value recorded by `gen`
  double rff_gamma = 0.0;    // > 0 enables random features
  Index rff_dim = 0;
  std::uint64_t rff_seed = 0;
};

struct LoadedData {
  RegularizedProblem problem;
  std::map<std::string, std::string> digests;
  nlohmann::ordered_json source;
};

LoadedData load_data(const DataOptions& opts);

struct GenOptions {
  Index n = 0;
  Index d = 0;
  double decay = 0.995;
  std::optional<double> nu;
  std::optional<double> target_de;  // bisection on ν instead of a fixed ν
  Index c = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void cmd_gen(const GenOptions& opts);

struct SolverChoice {
  std::string label;
  std::string solver;  // direct, cg, ihs, pcg, polyak-ihs, ada-ihs, ada-pcg, ada-polyak
  std::optional<std::string> m;
  std::optional<Index> m_init;
};

struct RunSettings {
  SketchFamily family = SketchFamily::Gaussian;
  Index s = 1;
  double rho = 0.125;
  Index T = 50;
  double tol = 0.0;
  std::uint64_t seed = 0;
  Index exact_cap = 4096;
  bool experimental = false;
};

/// Checks the solver name and the --m / --m-init pairing.
void validate_choice(const SolverChoice& choice, const RunSettings& settings);

struct TraceTable {
  SolverTrace trace;
  bool exact = false;
  /// Reference values at x0 when the trace does not start there (direct).
  std::optional<double> delta_tilde_0;
  std::optional<double> delta_exact_0;
};

TraceTable run_solver(const RegularizedProblem& p, const SolverChoice& choice,
                      const RunSettings& settings, const ExactSolution* exact);

inline constexpr const char* kTraceHeader =
    "t,m_t,K_t,delta_tilde,delta_exact,rel_error,rel_error_kind,wall_seconds,setup_seconds,event";

/// Writes the rows of one trace; `label` adds a leading solver column.
void write_trace_rows(std::ostream& out, const TraceTable& table,
                      const std::optional<std::string>& label);

struct SolveOptions {
  DataOptions data;
  SolverChoice choice;
  RunSettings settings;
  std::filesystem::path out;
};

void cmd_solve(const SolveOptions& opts);

struct CompareOptions {
  DataOptions data;
  std::vector<SolverChoice> runs;
  RunSettings settings;
  std::filesystem::path out;
  Index threads = 1;
};

/// Parses "LABEL=SOLVER[,m=..][,m-init=..]".
SolverChoice parse_run_spec(const std::string& spec);

void cmd_compare(const CompareOptions& opts);

struct ConcentrationOptions {
  DataOptions data;
  std::string check = "event";  // event, gaussian-deviation, srht-rownorm
  SketchFamily family = SketchFamily::Gaussian;
  Index s = 1;
  std::vector<Index> m_grid;
  double rho = 0.25;
  double delta = 0.1;
  Index trials = 200;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void cmd_concentration(const ConcentrationOptions& opts);

/// Value of ADASKETCH_THREADS, at least 1.
Index thread_limit();

}  // namespace adasketch::bench
