#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adasketch/errors.hpp"
#include "bench.hpp"

namespace {

using namespace adasketch;
using namespace adasketch::bench;

void add_data_flags(CLI::App* cmd, DataOptions& data) {
  cmd->add_option("--data", data.dir, "Directory written by `gen` (A.adsk, B.adsk, manifest.json)");
  cmd->add_option("--csv", data.csv, "Numeric CSV; the last column holds labels");
  cmd->add_option("--label-mode", data.label_mode, "class, real or none")
      ->check(CLI::IsMember({"class", "real", "none"}));
  cmd->add_option("--lambda-reg", data.lambda_reg, "Ridge parameter for --csv data");
  cmd->add_option("--nu", data.nu, "Override the nu recorded with --data");
  cmd->add_option("--rff-gamma", data.rff_gamma, "Random-features bandwidth (0 disables)");
  cmd->add_option("--rff-dim", data.rff_dim, "Random-features output dimension");
  cmd->add_option("--rff-seed", data.rff_seed, "Random-features seed");
}

void add_run_flags(CLI::App* cmd, RunSettings& s, std::string& family) {
  cmd->add_option("--sketch", family, "gaussian, srht or sjlt")
      ->check(CLI::IsMember({"gaussian", "srht", "sjlt"}));
  cmd->add_option("--s", s.s, "Nonzeros per column for sjlt");
  cmd->add_option("--rho", s.rho, "Rate parameter in (0, 1)");
  cmd->add_option("--T", s.T, "Iteration budget");
  cmd->add_option("--tol", s.tol, "Stop once delta_tilde <= tol * delta_tilde_0 (0 disables)");
  cmd->add_option("--seed", s.seed, "Base seed");
  cmd->add_option("--exact-cap", s.exact_cap, "Largest d for which exact errors are computed");
  cmd->add_flag("--experimental", s.experimental, "Allow ada-polyak");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive sketch-size randomized preconditioned solvers"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic problem");
  gen_cmd->add_option("--n", gen.n, "Rows of A")->required();
  gen_cmd->add_option("--d", gen.d, "Columns of A")->required();
  gen_cmd->add_option("--decay", gen.decay, "Singular values decay^j, j = 1..d");
  gen_cmd->add_option("--nu", gen.nu, "Regularization nu");
  gen_cmd->add_option("--target-de", gen.target_de, "Choose nu to hit this effective dimension");
  gen_cmd->add_option("--c", gen.c, "Number of right-hand sides");
  gen_cmd->add_option("--seed", gen.seed, "Seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  SolveOptions solve;
  std::string solve_family = "gaussian";
  auto* solve_cmd = app.add_subcommand("solve", "Run one solver and write its trace");
  add_data_flags(solve_cmd, solve.data);
  add_run_flags(solve_cmd, solve.settings, solve_family);
  solve_cmd->add_option("--solver", solve.choice.solver,
                        "direct, cg, ihs, pcg, polyak-ihs, ada-ihs, ada-pcg or ada-polyak")
      ->required();
  solve_cmd->add_option("--m", solve.choice.m, "Fixed sketch size, e.g. 512 or 2d");
  solve_cmd->add_option("--m-init", solve.choice.m_init, "Initial sketch size for ada-* solvers");
  solve_cmd->add_option("--out", solve.out, "Trace CSV path")->required();

  CompareOptions compare;
  std::string compare_family = "gaussian";
  std::vector<std::string> run_specs;
  auto* compare_cmd = app.add_subcommand("compare", "Run several solvers on one problem");
  add_data_flags(compare_cmd, compare.data);
  add_run_flags(compare_cmd, compare.settings, compare_family);
  compare_cmd->add_option("--run", run_specs, "LABEL=SOLVER[,m=..][,m-init=..], repeatable")
      ->required();
  compare_cmd->add_option("--out", compare.out, "Combined trace CSV path")->required();

  ConcentrationOptions conc;
  std::string conc_family = "gaussian";
  auto* conc_cmd = app.add_subcommand("concentration", "Monte Carlo concentration study");
  add_data_flags(conc_cmd, conc.data);
  conc_cmd->add_option("--check", conc.check, "event, gaussian-deviation or srht-rownorm")
      ->check(CLI::IsMember({"event", "gaussian-deviation", "srht-rownorm"}));
  conc_cmd->add_option("--family", conc_family, "Sketch family for --check event")
      ->check(CLI::IsMember({"gaussian", "srht", "sjlt"}));
  conc_cmd->add_option("--s", conc.s, "Nonzeros per column for sjlt");
  conc_cmd->add_option("--m-grid", conc.m_grid, "Sketch sizes")->delimiter(',');
  conc_cmd->add_option("--rho", conc.rho, "Rate parameter");
  conc_cmd->add_option("--delta", conc.delta, "Target failure probability");
  conc_cmd->add_option("--trials", conc.trials, "Trials per grid point");
  conc_cmd->add_option("--seed", conc.seed, "Seed");
  conc_cmd->add_option("--out", conc.out, "Report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFlag;
  }

  try {
    if (*gen_cmd) {
      cmd_gen(gen);
    } else if (*solve_cmd) {
      solve.settings.family = parse_sketch_family(solve_family);
      solve.choice.label = solve.choice.solver;
      cmd_solve(solve);
    } else if (*compare_cmd) {
      compare.settings.family = parse_sketch_family(compare_family);
      for (const auto& spec : run_specs) compare.runs.push_back(parse_run_spec(spec));
      compare.threads = thread_limit();
      cmd_compare(compare);
    } else if (*conc_cmd) {
      conc.family = parse_sketch_family(conc_family);
      cmd_concentration(conc);
    }
  } catch (const FlagError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitFlag;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
