#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "adasketch/io.hpp"
#include "bench.hpp"

namespace fs = std::filesystem;
using adasketch::bench::kTraceHeader;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "adasketch_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADASKETCH_CLI) + " " + args + " > " +
                          (work_dir() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

// Checks the trace schema and returns the data rows. `offset` skips a label column.
std::vector<std::vector<std::string>> check_trace(const fs::path& p, bool labelled) {
  auto rows = read_csv(p);
  EXPECT_FALSE(rows.empty());
  if (rows.empty()) return rows;
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  EXPECT_EQ(header, (labelled ? std::string("solver,") : std::string()) + kTraceHeader);
  const std::size_t o = labelled ? 1 : 0;
  const std::set<std::string> events{"plain", "accepted", "resketch"};
  const std::set<std::string> kinds{"exact", "proxy"};
  rows.erase(rows.begin());
  for (const auto& r : rows) {
    EXPECT_EQ(r.size(), 10 + o);
    if (r.size() != 10 + o) continue;
    for (std::size_t k : {0, 1, 2}) EXPECT_NO_THROW(std::stoll(r[o + k]));
    for (std::size_t k : {3, 5, 7, 8}) EXPECT_NO_THROW(std::stod(r[o + k]));
    if (!r[o + 4].empty()) EXPECT_NO_THROW(std::stod(r[o + 4]));
    EXPECT_TRUE(kinds.count(r[o + 6])) << r[o + 6];
    EXPECT_TRUE(events.count(r[o + 9])) << r[o + 9];
  }
  return rows;
}

const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = work_dir() / "data";
    EXPECT_EQ(run_cli("gen --n 512 --d 32 --decay 0.9 --nu 0.05 --seed 7 --out " + d.string()), 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Gen, WritesMatricesAndManifest) {
  const fs::path d = dataset();
  EXPECT_EQ(adasketch::read_adsk(d / "A.adsk").rows(), 512);
  EXPECT_EQ(adasketch::read_adsk(d / "B.adsk").rows(), 32);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  for (const char* key : {"command", "config", "artifact_version", "seed", "started_at", "input_digests"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["command"], "gen");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config"]["nu"], 0.05);
}

TEST(Gen, RerunGivesIdenticalDigests) {
  const fs::path again = work_dir() / "data_again";
  ASSERT_EQ(run_cli("gen --n 512 --d 32 --decay 0.9 --nu 0.05 --seed 7 --out " + again.string()), 0);
  for (const char* f : {"A.adsk", "B.adsk"}) {
    EXPECT_EQ(adasketch::bench::sha256_file(dataset() / f), adasketch::bench::sha256_file(again / f));
  }
}

TEST(Gen, TargetEffectiveDimension) {
  const fs::path d = work_dir() / "data_de";
  ASSERT_EQ(run_cli("gen --n 256 --d 64 --decay 0.95 --target-de 20 --seed 1 --out " + d.string()), 0);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_NEAR(m["config"]["effective_dimension"].get<double>(), 20.0, 1e-6);
}

TEST(Gen, BadFlagsExitTwo) {
  const std::string out = " --out " + (work_dir() / "bad").string();
  EXPECT_EQ(run_cli("gen --n 64 --d 8 --decay 1.5 --nu 0.1" + out), 2);
  EXPECT_EQ(run_cli("gen --n 64 --d 8 --decay 0.9" + out), 2);  // neither --nu nor --target-de
  EXPECT_EQ(run_cli("gen --n 64 --d 8 --nu 0.1 --bogus 1" + out), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Solve, AdaptiveTraceSchema) {
  const fs::path out = work_dir() / "ada.csv";
  ASSERT_EQ(run_cli("solve --solver ada-pcg --sketch sjlt --rho 0.125 --m-init 1 --T 20 --data " +
                    dataset().string() + " --out " + out.string()),
            0);
  const auto rows = check_trace(out, false);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows.front()[0], "0");
  EXPECT_EQ(rows.front()[5], "1");
  EXPECT_EQ(rows.front()[6], "exact");
  EXPECT_TRUE(fs::exists(out.string() + ".manifest.json"));
  const auto m = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
  EXPECT_EQ(m["command"], "solve");
  EXPECT_EQ(m["input_digests"].size(), 3u);
}

TEST(Solve, FixedPcgDefaultsToTwiceD) {
  const fs::path out = work_dir() / "pcg.csv";
  ASSERT_EQ(run_cli("solve --solver pcg --sketch srht --m 2d --T 5 --data " + dataset().string() +
                    " --out " + out.string()),
            0);
  for (const auto& r : check_trace(out, false)) EXPECT_EQ(r[1], "64");
}

TEST(Solve, DirectEmitsSingleRow) {
  const fs::path out = work_dir() / "direct.csv";
  ASSERT_EQ(run_cli("solve --solver direct --data " + dataset().string() + " --out " + out.string()), 0);
  const auto rows = check_trace(out, false);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LE(std::stod(rows[0][5]), 1e-20);
}

TEST(Solve, ProxyAboveExactCap) {
  const fs::path out = work_dir() / "proxy.csv";
  ASSERT_EQ(run_cli("solve --solver ihs --m 128 --T 3 --exact-cap 8 --data " + dataset().string() +
                    " --out " + out.string()),
            0);
  for (const auto& r : check_trace(out, false)) {
    EXPECT_EQ(r[6], "proxy");
    EXPECT_TRUE(r[4].empty());
  }
}

TEST(Solve, FlagConflictsExitTwo) {
  const std::string base = " --data " + dataset().string() + " --out " + (work_dir() / "x.csv").string();
  EXPECT_EQ(run_cli("solve --solver ihs --m-init 4" + base), 2);
  EXPECT_EQ(run_cli("solve --solver ada-ihs --m 64" + base), 2);
  EXPECT_EQ(run_cli("solve --solver cg --m 64" + base), 2);
  EXPECT_EQ(run_cli("solve --solver ada-polyak" + base), 2);
  EXPECT_EQ(run_cli("solve --solver newton" + base), 2);
  EXPECT_EQ(run_cli("solve --solver pcg --m 9999" + base), 2);
  EXPECT_EQ(run_cli("solve --solver ada-polyak --experimental --T 3" + base), 0);
}

TEST(Solve, CsvInput) {
  const fs::path csv = work_dir() / "input.csv";
  {
    std::ofstream f(csv);
    f << "x1,x2,x3,label\n";
    for (int i = 0; i < 60; ++i) {
      f << (i % 7) * 0.5 << ',' << (i % 5) - 2.0 << ',' << (i * i % 11) * 0.1 << ',' << (i % 3) << '\n';
    }
  }
  const fs::path out = work_dir() / "csv_trace.csv";
  ASSERT_EQ(run_cli("solve --solver pcg --T 4 --csv " + csv.string() + " --out " + out.string()), 0);
  check_trace(out, false);
  ASSERT_EQ(run_cli("solve --solver ada-ihs --T 4 --csv " + csv.string() +
                    " --rff-gamma 0.5 --rff-dim 40 --out " + out.string()),
            0);

  const fs::path bad = work_dir() / "ragged.csv";
  std::ofstream(bad) << "1,2,0\n3,1\n";
  EXPECT_EQ(run_cli("solve --solver cg --csv " + bad.string() + " --out " + out.string()), 3);
  EXPECT_EQ(run_cli("solve --solver cg --data " + (work_dir() / "missing").string() + " --out " +
                    out.string()),
            3);
}

TEST(Compare, LabelledGroupsAndRowCount) {
  const fs::path out = work_dir() / "compare.csv";
  ASSERT_EQ(run_cli("compare --T 15 --data " + dataset().string() +
                    " --run direct=direct --run cg=cg --run pcg-2d=pcg,m=2d --run ada=ada-pcg,m-init=1"
                    " --out " + out.string()),
            0);
  const auto rows = check_trace(out, true);
  std::map<std::string, std::vector<const std::vector<std::string>*>> groups;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!groups.count(r[0])) order.push_back(r[0]);
    groups[r[0]].push_back(&r);
  }
  EXPECT_EQ(order, (std::vector<std::string>{"direct", "cg", "pcg-2d", "ada"}));
  std::size_t expected = 0;
  for (const auto& [label, g] : groups) {
    const auto& last = *g.back();
    const std::size_t n = label == "direct" ? 1 : std::stoul(last[1]) + std::stoul(last[3]) + 1;
    EXPECT_EQ(g.size(), n) << label;
    expected += n;
  }
  EXPECT_EQ(rows.size(), expected);
  EXPECT_TRUE(fs::exists(out.string() + ".manifest.json"));
}

TEST(Compare, DuplicateLabelsRejected) {
  EXPECT_EQ(run_cli("compare --data " + dataset().string() + " --run a=cg --run a=pcg --out " +
                    (work_dir() / "dup.csv").string()),
            2);
  EXPECT_EQ(run_cli("compare --data " + dataset().string() + " --run nolabel --out " +
                    (work_dir() / "dup.csv").string()),
            2);
}

TEST(Concentration, GridReports) {
  const fs::path out = work_dir() / "conc.json";
  const std::string args = "concentration --data " + dataset().string() +
                           " --check event --family gaussian --m-grid 64,128,256,512 --trials 200 --seed 3 --out ";
  ASSERT_EQ(run_cli(args + out.string()), 0);
  const auto j = nlohmann::json::parse(slurp(out));
  ASSERT_EQ(j.size(), 4u);
  for (const auto& r : j) {
    EXPECT_GE(r["success"].get<double>(), 0.0);
    EXPECT_LE(r["success"].get<double>(), 1.0);
  }
  const fs::path again = work_dir() / "conc_again.json";
  ASSERT_EQ(run_cli(args + again.string()), 0);
  EXPECT_EQ(slurp(out), slurp(again));
}

TEST(Concentration, OtherChecks) {
  const fs::path out = work_dir() / "conc2.json";
  ASSERT_EQ(run_cli("concentration --data " + dataset().string() +
                    " --check srht-rownorm --trials 50 --out " + out.string()),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(out)).size(), 1u);
  ASSERT_EQ(run_cli("concentration --data " + dataset().string() +
                    " --check gaussian-deviation --m-grid 480 --rho 0.5 --trials 50 --out " + out.string()),
            0);
  EXPECT_EQ(run_cli("concentration --data " + dataset().string() + " --check event --trials 10 --out " +
                    out.string()),
            2);
}

TEST(Bench, ParseHelpers) {
  using namespace adasketch::bench;
  EXPECT_EQ(parse_sketch_size("512", 100), 512);
  EXPECT_EQ(parse_sketch_size("2d", 100), 200);
  EXPECT_EQ(parse_sketch_size("d", 100), 100);
  EXPECT_THROW(parse_sketch_size("two", 100), FlagError);
  const SolverChoice c = parse_run_spec("fast=ada-pcg,m-init=8");
  EXPECT_EQ(c.label, "fast");
  EXPECT_EQ(c.solver, "ada-pcg");
  EXPECT_EQ(c.m_init, 8);
  EXPECT_THROW(parse_run_spec("x=pcg,q=1"), FlagError);
}
