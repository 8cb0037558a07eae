// lqg: solve LQG games on a grid, identify canonical structures from
// conditional action distributions, and emit the results as CSV tables.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 ill-posed
// equilibrium system, 3 identification or variance failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lqg/cli/config.hpp"
#include "lqg/cli/csv.hpp"
#include "lqg/lqg.hpp"

namespace fs = std::filesystem;
using namespace lqg;
using cli::CsvTable;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit : int { kOk = 0, kConfig = 1, kIllPosed = 2, kIdentification = 3 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularSystem: return kIllPosed;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NormalizationInfeasible:
    case ErrorKind::NotPSD:
    case ErrorKind::SingularOwnCovariance:
    case ErrorKind::InvalidArgument: return kConfig;
    default: return kIdentification;
  }
}

class Run {
 public:
  Run(std::string command, fs::path config_path, fs::path out, const cli::Scenario& s)
      : command_(std::move(command)), config_path_(std::move(config_path)), out_(std::move(out)), s_(s) {
    meta_["tool"] = "lqg";
    meta_["version"] = kVersion;
    meta_["command"] = command_;
    meta_["config"] = config_path_.filename().string();
    meta_["seed"] = s_.seed;
    meta_["n"] = s_.grid.size();
    meta_["payoff_family"] = s_.payoff_family;
    meta_["info_family"] = s_.info_family;
    meta_["signal_dim"] = s_.info.d;
    meta_["tolerances"] = {{"psd", s_.tol.psd}, {"pd", s_.tol.pd}, {"residual", s_.tol.residual},
                           {"spectral", s_.tol.spectral}};
    meta_["rng"] = kRngAlgorithm;
    meta_["outputs"] = nlohmann::ordered_json::array();
  }

  void emit(const std::string& name, const CsvTable& table) {
    cli::write_atomic(out_ / name, table.str());
    meta_["outputs"].push_back(name);
  }

  nlohmann::ordered_json& meta() { return meta_; }

  void finish(int code, const std::string& message = {}) {
    meta_["exit_code"] = code;
    if (!message.empty()) meta_["error"] = message;
    cli::write_atomic(out_ / "run_meta.json", meta_.dump(2) + "\n");
  }

  const cli::Scenario& scenario() const { return s_; }

 private:
  std::string command_;
  fs::path config_path_;
  fs::path out_;
  const cli::Scenario& s_;
  nlohmann::ordered_json meta_;
};

struct Solved {
  StandardizedInfo std_info;
  DiscreteOperator op;
  WellPosedness wp;
  AffineProfile prof;
};

CsvTable spectrum_table(const WellPosedness& wp) {
  CsvTable t({"block", "index", "real", "imag", "dist_to_one"});
  auto add = [&](const char* name, const Eigen::VectorXcd& spec) {
    for (Index k = 0; k < spec.size(); ++k) {
      t.row() << name << k << spec[k].real() << spec[k].imag() << std::abs(spec[k] - 1.0);
    }
  };
  add("intercept", wp.spectrum0);
  add("slope", wp.spectrum1);
  return t;
}

/// Builds, checks and solves the configured game. Writes the spectrum first
/// when `spectrum_out` is set so that it survives an ill-posed system.
Solved solve_game(Run& run, bool spectrum_out) {
  const cli::Scenario& s = run.scenario();
  Solved out;
  out.std_info = standardize(s.info, s.tol.pd);
  out.op = build_operator(s.payoff, out.std_info, s.grid);
  out.wp = spectral_check(out.op, s.tol.spectral);
  run.meta()["dist_to_one"] = out.wp.dist_to_one;
  run.meta()["well_posed"] = out.wp.well_posed;
  if (spectrum_out) run.emit("spectrum.csv", spectrum_table(out.wp));
  out.prof = solve_equilibrium(out.op, out.wp, s.tol);
  run.meta()["residual"] = equilibrium_residual(out.op, out.prof);
  return out;
}

std::pair<ConditionalOutcome, ConditionalOutcome> observe(const cli::Scenario& s, const Solved& g) {
  const OutcomeMoments mom = outcome_moments(g.std_info, g.prof);
  ConditionalOutcome c1 = condition_on_state(mom, s.theta1);
  ConditionalOutcome c2 = condition_on_state(mom, s.theta2);
  if (s.draws > 0) {
    c1 = empirical_conditional(c1, static_cast<Index>(s.draws), s.seed, 1);
    c2 = empirical_conditional(c2, static_cast<Index>(s.draws), s.seed, 2);
  }
  return {std::move(c1), std::move(c2)};
}

void cmd_solve(Run& run) {
  const cli::Scenario& s = run.scenario();
  const Solved g = solve_game(run, true);
  std::vector<std::string> header{"agent", "point", "phi0"};
  for (Index k = 0; k < g.prof.dim(); ++k) header.push_back("phi_" + std::to_string(k + 1));
  CsvTable t(header);
  for (Index i = 0; i < g.prof.size(); ++i) {
    auto row = t.row();
    row << i << s.grid.point(i) << g.prof.phi0[i];
    for (Index k = 0; k < g.prof.dim(); ++k) row << g.prof.phi(i, k);
  }
  run.emit("equilibrium.csv", t);
}

void cmd_identify(Run& run) {
  const cli::Scenario& s = run.scenario();
  const Solved g = solve_game(run, false);
  const auto [c1, c2] = observe(s, g);
  run.meta()["theta1"] = s.theta1;
  run.meta()["theta2"] = s.theta2;
  run.meta()["draws"] = s.draws;
  const IdentifiedCanonical idc = identify(c1, c2, s.info.prior, s.tol.pd);
  std::optional<SignedCanonical> sc;
  if (s.positive) sc = resolve_signs_positive(idc);

  std::vector<std::string> head{"agent", "phi0", "abs_phi1", "abs_h", "cross_phih"};
  if (sc) head.insert(head.end(), {"h", "phi1"});
  CsvTable t(head);
  for (Index i = 0; i < idc.size(); ++i) {
    auto row = t.row();
    row << i << idc.phi0[i] << idc.abs_phi1[i] << idc.abs_h[i] << idc.cross_phih[i];
    if (sc) row << sc->h[i] << sc->phi1[i];
  }
  std::vector<std::string> ghead{"i", "j", "abs_g", "cross_phig"};
  if (sc) ghead.push_back("g");
  CsvTable tg(ghead);
  for (Index i = 0; i < idc.size(); ++i) {
    for (Index j = 0; j < idc.size(); ++j) {
      auto row = tg.row();
      row << i << j << idc.abs_g(i, j) << idc.cross_phig(i, j);
      if (sc) row << sc->g(i, j);
    }
  }
  run.emit("identified.csv", t);
  run.emit("identified_g.csv", tg);
}

void cmd_variance(Run& run) {
  const cli::Scenario& s = run.scenario();
  if (s.paths.empty()) throw cli::ConfigError("variance needs team paths ([variance] paths, teams_file or --teams)");
  const Solved g = solve_game(run, false);
  const auto [c1, c2] = observe(s, g);
  const IdentifiedCanonical idc = identify(c1, c2, s.info.prior, s.tol.pd);
  const CanonicalForm canon = canonicalize(g.std_info, g.prof, s.tol.pd);
  const InformationStructure canon_info = canonical_to_info(canon.info, s.grid, s.info.prior.mu);

  CsvTable tu({"path", "p", "r_identified", "r_oracle", "abs_diff"});
  std::vector<IndexSet> teams;
  for (const auto& path : s.paths) {
    const double r_id = higher_order_uncertainty(idc, path, s.tol.pd);
    const double r_or = nested_projection_oracle(canon_info, path, s.tol.pd);
    tu.row() << cli::format_team_path(path) << static_cast<Index>(path.size()) << r_id << r_or << std::abs(r_id - r_or);
    for (const auto& team : path)
      if (std::find(teams.begin(), teams.end(), team) == teams.end()) teams.push_back(team);
  }

  const ActionMap amap = action_map(g.prof);
  CsvTable tg({"team", "r_signal", "r_action", "gap", "gap_ssr", "proportional", "ls_residual", "cos2_ratio", "cos2"});
  for (const auto& team : teams) {
    const GapReport r = gap_report(s.info, amap, team, s.tol.pd);
    auto row = tg.row();
    row << cli::format_team_path({team}) << r.r_signal << r.r_action << r.gap << r.ssr << r.proportional
        << r.ls_residual;
    if (team.size() == 1) {
      const CosineRatio cr = cosine_ratio(g.std_info, g.prof, team.front(), s.tol.pd);
      row << cr.lhs << cr.cos2;
    } else {
      row << "" << "";
    }
  }
  run.emit("uncertainty.csv", tu);
  run.emit("gap.csv", tg);
}

void cmd_tax_sweep(Run& run) {
  const cli::Scenario& s = run.scenario();
  if (s.sweep.h.empty()) throw cli::ConfigError("tax-sweep needs [tax_sweep] h or a uniform [info] h");
  const Index n = s.grid.size();
  const auto steps =
      static_cast<long long>(std::floor((s.sweep.tau_max - s.sweep.tau_min) / s.sweep.tau_step + 1e-9));
  CsvTable t({"kind", "h", "tau", "revenue_closed_form", "revenue_pipeline", "lower_bound"});
  for (double h : s.sweep.h) {
    const InformationStructure info = canonical_to_info(market_canonical(h, n), s.grid, 0.0);
    auto emit_row = [&](const char* kind, double tau) {
      t.row() << kind << h << tau << tax_revenue(tau, h) << tax_revenue_pipeline(tau, info, s.tol)
              << revenue_lower_bound(tau, info, s.tol.pd).bound;
    };
    for (long long k = 0; k <= steps; ++k) emit_row("curve", std::min(s.sweep.tau_max, s.sweep.tau_min + k * s.sweep.tau_step));
    const OptimalTax opt = optimal_tax(h);
    if (!opt.zero_revenue) emit_row(opt.unimodal ? "tau_star" : "tau_star_multimodal", opt.tau_star);
  }
  run.emit("tax_sweep.csv", t);
}

int cmd_roundtrip(Run& run) {
  const cli::Scenario& s = run.scenario();
  if (s.payoff_family != "market") throw cli::ConfigError("roundtrip needs payoff.family = \"market\"");
  if (s.roundtrip_h.empty()) throw cli::ConfigError("roundtrip needs [roundtrip] h or a uniform [info] h");
  CsvTable t({"h", "tau0", "theta1", "theta2", "status", "h_hat", "h_error", "tau_star", "tau_star_hat", "tau_error"});
  int code = kOk;
  for (double h : s.roundtrip_h) {
    const MarketScenario ms{s.market_tau, h, s.grid.size()};
    auto row = t.row();
    row << h << s.market_tau << s.theta1 << s.theta2;
    try {
      const RoundTrip r = policy_roundtrip(ms, {s.theta1, s.theta2}, s.tol);
      row << "ok" << r.h_hat << r.h_error << r.tau_star << r.tau_star_hat << r.tau_error;
    } catch (const Error& e) {
      code = std::max(code, exit_code_for(e.kind()));
      row << std::string(to_string(e.kind())) << "" << "" << "" << "" << "";
      std::cerr << "lqg: roundtrip h=" << cli::format_double(h) << ": " << e.what() << "\n";
    }
  }
  run.emit("roundtrip.csv", t);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-quadratic-Gaussian games: equilibrium, identification and variance tools"};
  app.set_version_flag("--version", kVersion);

  std::string command;
  fs::path config_path;
  fs::path out_dir = ".";
  cli::Overrides ov;
  std::optional<std::uint64_t> seed;
  std::optional<long long> n;
  std::optional<long long> draws;
  std::optional<double> theta1;
  std::optional<double> theta2;
  std::optional<fs::path> teams;

  app.add_option("command", command, "solve | identify | variance | tax-sweep | roundtrip")
      ->required()
      ->check(CLI::IsMember({"solve", "identify", "variance", "tax-sweep", "roundtrip"}));
  app.add_option("--config", config_path, "scenario file")->required();
  app.add_option("--out", out_dir, "output directory (created if missing)");
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--draws", draws, "identify from this many simulated draws per state instead of exact moments");
  app.add_flag("--positive", ov.positive, "resolve signs under nonnegative exposures");
  app.add_option("--n", n, "override the grid size");
  app.add_option("--theta1", theta1, "first conditioning state");
  app.add_option("--theta2", theta2, "second conditioning state");
  app.add_option("--teams", teams, "file with one team path per line, e.g. \"3 4;5\"");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  ov.seed = seed;
  ov.n = n;
  ov.draws = draws;
  ov.theta1 = theta1;
  ov.theta2 = theta2;
  ov.teams_file = teams;

  cli::Scenario scenario;
  try {
    const cli::Document doc = cli::Document::load(config_path);
    scenario = cli::build_scenario(doc, config_path.parent_path(), ov);
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "lqg: config error: " << e.what() << "\n";
    return kConfig;
  }

  Run run(command, config_path, out_dir, scenario);
  int code = kOk;
  std::string message;
  try {
    if (command == "solve") {
      cmd_solve(run);
    } else if (command == "identify") {
      cmd_identify(run);
    } else if (command == "variance") {
      cmd_variance(run);
    } else if (command == "tax-sweep") {
      cmd_tax_sweep(run);
    } else {
      code = cmd_roundtrip(run);
    }
  } catch (const cli::ConfigError& e) {
    code = kConfig;
    message = e.what();
  } catch (const Error& e) {
    code = exit_code_for(e.kind());
    message = e.what();
  } catch (const std::exception& e) {
    code = kConfig;
    message = e.what();
  }
  try {
    run.finish(code, message);
  } catch (const std::exception& e) {
    std::cerr << "lqg: cannot write run metadata: " << e.what() << "\n";
    if (code == kOk) code = kConfig;
  }
  if (!message.empty()) std::cerr << "lqg: " << command << " failed: " << message << "\n";
  return code;
}
