#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lqg/cli/config.hpp"
#include "lqg/cli/csv.hpp"
#include "lqg/lqg.hpp"

namespace fs = std::filesystem;
using namespace lqg;

namespace {

const fs::path kScenarios = LQG_EXAMPLE_DIR;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("lqg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LQG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    ADD_FAILURE() << "no column " << name;
    return 0;
  }
  double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in.good()) << path;
  Csv csv;
  std::string line;
  std::getline(in, line);
  csv.header = split(line);
  while (std::getline(in, line)) csv.rows.push_back(split(line));
  return csv;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string market(const std::string& file = "market.toml") { return "--config " + (kScenarios / file).string(); }

}  // namespace

TEST(FormatDouble, SeventeenSignificantDigits) {
  EXPECT_EQ(cli::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(cli::format_double(0.0), "0");
  EXPECT_EQ(cli::format_double(-2.5), "-2.5");
  EXPECT_EQ(cli::format_double(1e-20), "9.9999999999999995e-21");
  EXPECT_EQ(std::stod(cli::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(CsvTable, RowsAndWidth) {
  cli::CsvTable t({"a", "b"});
  t.row() << 1 << 0.5;
  t.row() << "x" << true;
  EXPECT_EQ(t.str(), "a,b\n1,0.5\nx,true\n");
  EXPECT_EQ(t.rows(), 3u);
}

TEST(WriteAtomic, ReplacesContent) {
  const fs::path dir = fresh_dir("atomic");
  cli::write_atomic(dir / "f.csv", "one\n");
  cli::write_atomic(dir / "f.csv", "two\n");
  EXPECT_EQ(slurp(dir / "f.csv"), "two\n");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), 1);
}

TEST(Config, ParsesScalarsArraysAndComments) {
  const auto doc = cli::Document::parse(
      "seed = 7 # trailing\n"
      "[grid]\n"
      "n = 1_000\n"
      "[info]\n"
      "family = \"canonical # not a comment\"\n"
      "h = [0.1, 0.2, 3e-1]\n"
      "paths = [\"1;2\", \"3\"]\n"
      "flag = true\n");
  EXPECT_EQ(doc.integer("", "seed"), 7);
  EXPECT_EQ(doc.integer("grid", "n"), 1000);
  EXPECT_EQ(doc.string("info", "family"), "canonical # not a comment");
  EXPECT_TRUE(doc.boolean("info", "flag", false));
  const auto* h = std::get_if<std::vector<double>>(&doc.find("info", "h")->value);
  ASSERT_NE(h, nullptr);
  EXPECT_EQ(*h, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(doc.number("grid", "missing", 4.0), 4.0);
}

TEST(Config, ErrorsNameLineAndField) {
  auto message = [](const std::string& text) -> std::string {
    try {
      const auto doc = cli::Document::parse(text, "s.toml");
      doc.restrict_keys("grid", {"n"});
      doc.integer("grid", "n");
    } catch (const cli::ConfigError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message("[grid]\nn = abc\n").find("s.toml:2"), std::string::npos);
  EXPECT_NE(message("[grid]\nn = 2.5\n").find("grid.n: expected an integer"), std::string::npos);
  EXPECT_NE(message("[grid]\nm = 3\n").find("grid.m: unknown field"), std::string::npos);
  EXPECT_NE(message("[grid]\n").find("missing required field grid.n"), std::string::npos);
  EXPECT_NE(message("[grid]\nn = 1\nn = 2\n").find("duplicate key"), std::string::npos);
  EXPECT_NE(message("[grid\n").find("s.toml:1"), std::string::npos);
  EXPECT_NE(message("[grid]\nn = [1, \"a\"]\n").find("mix"), std::string::npos);
}

TEST(Config, TeamPaths) {
  EXPECT_EQ(cli::parse_team_path("3 4;5"), (TeamPath{{3, 4}, {5}}));
  EXPECT_EQ(cli::parse_team_path(" 1,2 ; 2 "), (TeamPath{{1, 2}, {2}}));
  EXPECT_EQ(cli::format_team_path({{3, 4}, {5}}), "3 4;5");
  EXPECT_THROW(cli::parse_team_path("1;;2"), std::exception);
  EXPECT_THROW(cli::parse_team_path("x"), std::exception);
}

TEST(Config, MarketScenarioBuildsTheGame) {
  const fs::path path = kScenarios / "market.toml";
  cli::Overrides ov;
  ov.n = 20;
  const cli::Scenario s = cli::build_scenario(cli::Document::load(path), path.parent_path(), ov);
  EXPECT_EQ(s.grid.size(), 20);
  EXPECT_EQ(s.payoff_family, "market");
  EXPECT_DOUBLE_EQ(s.market_tau, 0.5);
  EXPECT_TRUE(s.payoff.w.isApproxToConstant(-0.5));
  EXPECT_NEAR(s.info.k_theta[3], 0.8, 1e-15);
  EXPECT_EQ(s.paths.size(), 5u);
}

TEST(Cli, SolveMarket) {
  const fs::path out = fresh_dir("solve");
  ASSERT_EQ(run_cli("solve " + market() + " --out " + out.string()), 0);
  const Csv eq = read_csv(out / "equilibrium.csv");
  ASSERT_EQ(eq.rows.size(), 100u);
  for (std::size_t r = 0; r < eq.rows.size(); ++r) EXPECT_NEAR(eq.num(r, "phi_1"), 0.4 / 1.32, 1e-12);
  EXPECT_TRUE(fs::exists(out / "spectrum.csv"));
  EXPECT_TRUE(fs::exists(out / "run_meta.json"));
}

TEST(Cli, SingularConfigExitsTwoWithSpectrum) {
  const fs::path out = fresh_dir("singular");
  EXPECT_EQ(run_cli("solve " + market("singular.toml") + " --out " + out.string()), 2);
  const Csv sp = read_csv(out / "spectrum.csv");
  double closest = 1.0;
  for (std::size_t r = 0; r < sp.rows.size(); ++r) closest = std::min(closest, sp.num(r, "dist_to_one"));
  EXPECT_LE(closest, 1e-10);
  EXPECT_FALSE(fs::exists(out / "equilibrium.csv"));
}

TEST(Cli, NoIncentiveGivesZeroEquilibrium) {
  const fs::path out = fresh_dir("zero");
  ASSERT_EQ(run_cli("solve " + market("no_incentive.toml") + " --out " + out.string()), 0);
  const Csv eq = read_csv(out / "equilibrium.csv");
  for (std::size_t r = 0; r < eq.rows.size(); ++r) {
    EXPECT_EQ(eq.num(r, "phi0"), 0.0);
    EXPECT_EQ(eq.num(r, "phi_1"), 0.0);
  }
}

TEST(Cli, IdentifyExactMode) {
  const fs::path out = fresh_dir("identify");
  ASSERT_EQ(run_cli("identify " + market() + " --positive --n 30 --out " + out.string()), 0);
  const Csv id = read_csv(out / "identified.csv");
  ASSERT_EQ(id.rows.size(), 30u);
  for (std::size_t r = 0; r < id.rows.size(); ++r) {
    EXPECT_NEAR(id.num(r, "abs_h"), 0.8, 1e-10);
    EXPECT_NEAR(id.num(r, "h"), 0.8, 1e-10);
  }
  EXPECT_EQ(read_csv(out / "identified_g.csv").rows.size(), 900u);
}

TEST(Cli, IdentifyFromDraws) {
  // Monte Carlo standard error of |h| estimated from independent replications.
  auto estimates = [](int seed) {
    const fs::path out = fresh_dir("draws" + std::to_string(seed));
    EXPECT_EQ(run_cli("identify " + market() + " --n 6 --draws 1000000 --seed " + std::to_string(seed) + " --out " +
                      out.string()),
              0);
    const Csv id = read_csv(out / "identified.csv");
    std::vector<double> h;
    for (std::size_t r = 0; r < id.rows.size(); ++r) h.push_back(id.num(r, "abs_h"));
    return h;
  };
  double sum_sq = 0.0;
  int count = 0;
  for (int seed = 1; seed <= 6; ++seed) {
    for (double h : estimates(seed)) {
      sum_sq += (h - 0.8) * (h - 0.8);
      ++count;
    }
  }
  const double se = std::sqrt(sum_sq / count);
  EXPECT_LT(se, 2e-3);
  for (double h : estimates(20240611)) EXPECT_NEAR(h, 0.8, 3.0 * se);
}

TEST(Cli, DegenerateStatesExitThree) {
  const fs::path out = fresh_dir("degenerate");
  EXPECT_EQ(run_cli("identify " + market() + " --theta1 1 --theta2 1 --out " + out.string()), 3);
  EXPECT_NE(slurp(out / "run_meta.json").find("DegenerateStates"), std::string::npos);
}

TEST(Cli, VarianceOnMarket) {
  const fs::path out = fresh_dir("variance");
  ASSERT_EQ(run_cli("variance " + market("market_h06.toml") + " --out " + out.string()), 0);
  const Csv u = read_csv(out / "uncertainty.csv");
  std::map<std::string, double> by_path;
  for (std::size_t r = 0; r < u.rows.size(); ++r) {
    by_path[u.rows[r][0]] = u.num(r, "r_identified");
    EXPECT_LE(u.num(r, "abs_diff"), 1e-10);
  }
  EXPECT_NEAR(by_path.at("3"), 0.64, 1e-12);
  EXPECT_NEAR(by_path.at("3;5"), 0.313344, 1e-12);
  EXPECT_NEAR(by_path.at("2;2"), 0.0, 1e-10);
  const Csv g = read_csv(out / "gap.csv");
  for (std::size_t r = 0; r < g.rows.size(); ++r) EXPECT_LE(std::abs(g.num(r, "gap")), 1e-10);
}

TEST(Cli, TeamsFileOverride) {
  const fs::path out = fresh_dir("teams");
  std::ofstream(out / "teams.txt") << "# paths\n0\n0 1;2\n";
  ASSERT_EQ(run_cli("variance " + market() + " --n 10 --teams " + (out / "teams.txt").string() + " --out " +
                    out.string()),
            0);
  EXPECT_EQ(read_csv(out / "uncertainty.csv").rows.size(), 2u);
}

TEST(Cli, TaxSweep) {
  const fs::path out = fresh_dir("sweep");
  ASSERT_EQ(run_cli("tax-sweep " + market() + " --n 20 --out " + out.string()), 0);
  const Csv t = read_csv(out / "tax_sweep.csv");
  int curves = 0;
  int stars = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double tau = t.num(r, "tau");
    const double h = t.num(r, "h");
    EXPECT_NEAR(t.num(r, "revenue_closed_form"), t.num(r, "revenue_pipeline"), 1e-8);
    EXPECT_NEAR(t.num(r, "lower_bound"), revenue_bound_factor(tau) * h * h, 1e-14);
    if (t.rows[r][0] == "curve") {
      ++curves;
      if (tau == 0.0 || tau == 1.0) EXPECT_EQ(t.num(r, "revenue_pipeline"), 0.0);
    } else {
      ++stars;
    }
  }
  EXPECT_EQ(curves, 3 * 101);
  EXPECT_EQ(stars, 3);
}

TEST(Cli, Roundtrip) {
  const fs::path out = fresh_dir("roundtrip");
  ASSERT_EQ(run_cli("roundtrip " + market() + " --n 20 --out " + out.string()), 0);
  const Csv t = read_csv(out / "roundtrip.csv");
  ASSERT_EQ(t.rows.size(), 4u);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EXPECT_EQ(t.rows[r][t.col("status")], "ok");
    EXPECT_LE(t.num(r, "h_error"), 1e-8);
    EXPECT_LE(t.num(r, "tau_error"), 1e-5);
  }
}

TEST(Cli, ConfigErrorsExitOne) {
  const fs::path out = fresh_dir("badconfig");
  std::ofstream(out / "bad.toml") << "[grid]\nn = 10\nbogus = 1\n";
  EXPECT_EQ(run_cli("solve --config " + (out / "bad.toml").string() + " --out " + out.string()), 1);
  EXPECT_EQ(run_cli("solve --config " + (out / "missing.toml").string()), 1);
  EXPECT_EQ(run_cli("frobnicate " + market()), 1);
}

TEST(Cli, DeterministicOutputs) {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  for (const fs::path& out : {a, b}) {
    ASSERT_EQ(run_cli("identify " + market() + " --n 8 --draws 20000 --seed 5 --out " + out.string()), 0);
  }
  for (const char* f : {"identified.csv", "identified_g.csv", "run_meta.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const fs::path c = fresh_dir("det_c");
  ASSERT_EQ(run_cli("identify " + market() + " --n 8 --draws 20000 --seed 6 --out " + c.string()), 0);
  EXPECT_NE(slurp(a / "identified.csv"), slurp(c / "identified.csv"));
}

TEST(Cli, TabulatedScenario) {
  const fs::path out = fresh_dir("tabulated");
  ASSERT_EQ(run_cli("variance " + market("tabulated.toml") + " --out " + out.string()), 0);
  const Csv g = read_csv(out / "gap.csv");
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    EXPECT_GE(g.num(r, "gap"), -1e-9);
    EXPECT_NEAR(g.num(r, "gap"), g.num(r, "gap_ssr"), 1e-8);
  }
  const Csv u = read_csv(out / "uncertainty.csv");
  for (std::size_t r = 0; r < u.rows.size(); ++r) EXPECT_LE(u.num(r, "abs_diff"), 1e-8);
}
