// Copyright 2026 The nanses Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: equilibrium solves, the no-SES baseline, the
// incentive-compatibility audit, participation sweeps, and the forecast-noise
// study. Outputs are flat JSON/CSV files under --out; every file carries a
// header block with the artifact version, the config hash, and the seed.
//
// Exit codes: 0 success, 1 usage, 2 infeasible/validation, 3 non-convergence,
// 4 certificate or audit failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nanses/common.hpp"
#include "nanses/mechanism.hpp"
#include "nanses/metrics.hpp"
#include "nanses/scenario.hpp"
#include "nanses/stackelberg.hpp"

namespace {

using nlohmann::json;
using namespace nanses;

struct Options {
  std::string scenario_path;
  bool generate = false;
  std::size_t users = 40;
  double fraction = 0.25;
  std::uint64_t seed = 1;
  double daily_demand = 18.0;
  double daily_pv = 3.4;
  double capacity = 80.0;
  double initial_charge_frac = 0.25;
  double price_low = 10.0;
  double price_high = 55.0;
  double price_avg = 25.0;

  double tau = 1e-4;
  std::size_t max_rounds = 500;
  double kkt_tol = 1e-8;
  double p_min = 0.1;
  double relaxation = 1.0;
  std::size_t certify_samples = 2000;
  std::string out_dir = "out";

  // ic-audit
  std::string audit_user = "all";
  int audit_step = -1;
  std::size_t audit_points = 41;
  double audit_tol = 1e-7;
  bool full_game = false;

  // sweep
  std::vector<double> fractions{0.05, 0.10, 0.20, 0.30, 0.40, 0.50,
                                0.60, 0.70, 0.80, 0.90, 1.00};

  // noise study
  double mape_max = 50.0;
  double mape_step = 5.0;
  std::size_t noise_draws = 12;  // antithetic pairs per level
};

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string config_digest(const Options& opt, const std::string& command) {
  std::ostringstream os;
  os << command << '|' << opt.scenario_path << '|' << opt.generate << '|' << opt.users << '|'
     << opt.fraction << '|' << opt.seed << '|' << opt.daily_demand << '|' << opt.daily_pv
     << '|' << opt.capacity << '|' << opt.initial_charge_frac << '|' << opt.price_low << '|'
     << opt.price_high << '|' << opt.price_avg << '|' << opt.tau << '|' << opt.max_rounds
     << '|' << opt.kkt_tol << '|' << opt.p_min << '|' << opt.relaxation << '|'
     << opt.audit_user << '|' << opt.audit_step << '|' << opt.audit_points << '|'
     << opt.audit_tol << '|' << opt.full_game << '|' << opt.mape_max << '|' << opt.mape_step
     << '|' << opt.noise_draws;
  for (double f : opt.fractions) os << ',' << f;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

struct OutputContext {
  std::filesystem::path dir;
  std::string command;
  std::string hash;
  std::uint64_t seed = 1;

  json meta() const {
    return json{{"artifact_version", kVersion},
                {"command", command},
                {"config_hash", hash},
                {"seed", seed}};
  }

  // Files land under their final name only once complete.
  void write_text(const std::string& name, const std::string& content) const {
    const std::filesystem::path tmp = dir / (name + ".tmp");
    {
      std::ofstream out(tmp);
      NANSES_CHECK(out.good(), ErrorCategory::kUsage,
                   "cannot write output file " + tmp.string());
      out << content;
    }
    std::filesystem::rename(tmp, dir / name);
  }

  std::ostringstream open_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "# nanses " << kVersion << "\n";
    out << "# command=" << command << " config_hash=" << hash << " seed=" << seed << "\n";
    return out;
  }

  void write_json(const std::string& name, json j) const {
    j["meta"] = meta();
    write_text(name, j.dump(2) + "\n");
  }
};

Scenario make_scenario(const Options& opt) {
  if (!opt.scenario_path.empty()) return load_scenario(opt.scenario_path);
  NANSES_CHECK(opt.generate, ErrorCategory::kUsage,
               "either --scenario FILE or --generate is required");
  CaseStudyParams params;
  params.n_total = opt.users;
  params.participating_fraction = opt.fraction;
  params.seed = opt.seed;
  params.base.daily_demand_kwh = opt.daily_demand;
  params.base.daily_pv_kwh = opt.daily_pv;
  params.ses.capacity = opt.capacity;
  params.ses.initial_charge = opt.initial_charge_frac * opt.capacity;
  params.tou.price_low = opt.price_low;
  params.tou.price_high = opt.price_high;
  params.tou.price_avg = opt.price_avg;
  return generate_case_study(params);
}

IterateConfig iterate_config(const Options& opt) {
  IterateConfig config;
  config.tau = opt.tau;
  config.max_rounds = opt.max_rounds;
  config.kkt_tol = opt.kkt_tol;
  config.p_min = opt.p_min;
  config.relaxation = opt.relaxation;
  return config;
}

json report_to_json(const RunReport& report) {
  json groups;
  if (report.groups.has_participating) {
    groups["participating_mean"] = report.groups.participating_mean;
  }
  if (report.groups.has_non_participating) {
    groups["non_participating_mean"] = report.groups.non_participating_mean;
  }
  json users = json::array();
  for (const auto& [id, cost] : report.user_daily_costs) {
    users.push_back({{"id", id}, {"daily_cost_cents", cost}});
  }
  return json{{"kind", report.kind},
              {"par", report.par},
              {"social_cost_cents", report.social_cost_total},
              {"community_cost_cents", report.community_cost},
              {"retailer_payoff_cents", report.payoff.cumulative},
              {"group_costs", groups},
              {"user_daily_costs", users}};
}

void write_timeseries_csv(const OutputContext& ctx, const Scenario& scenario,
                          const RunReport& report, const EquilibriumResult* eq) {
  std::ostringstream out = ctx.open_csv();
  out << "step,hour,total_load_kwh,grid_price_cents,ses_price_cents,social_cost_cents";
  if (eq) {
    out << ",participating_load_kwh,grid_exchange_kwh,storage_kwh,retailer_payoff_cents";
  }
  out << "\n";
  for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
    out << t << ',' << scenario.grid.step_start_hour(t) << ',' << report.total_load[t] << ','
        << report.grid_prices[t] << ',' << report.ses_prices[t] << ','
        << report.social_cost_per_step[t];
    if (eq) {
      out << ',' << eq->follower.aggregate[t] << ',' << eq->rho.grid_exchange[t] << ','
          << eq->storage.charge[t] << ',' << eq->payoff.per_step[t];
    }
    out << "\n";
  }
  ctx.write_text("report.csv", out.str());
}

int cmd_generate(const Options& opt, const OutputContext& ctx) {
  Options gen = opt;
  gen.scenario_path.clear();
  gen.generate = true;
  const Scenario scenario = make_scenario(gen);
  save_scenario(scenario, (ctx.dir / "scenario.json").string());
  std::cout << "wrote " << (ctx.dir / "scenario.json").string() << "\n";
  return 0;
}

int cmd_solve(const Options& opt, const OutputContext& ctx) {
  const Scenario scenario = make_scenario(opt);
  const EquilibriumResult eq = iterate(scenario, iterate_config(opt));
  const CertificateReport cert = certify(eq, scenario, 200, opt.certify_samples);
  const RunReport report = system_report(eq, scenario);
  const LedgerResiduals ledger = ledger_residuals(eq, scenario);

  json j = report_to_json(report);
  j["rounds"] = eq.rounds;
  j["strategy"] = {{"ses_price_cents", eq.rho.ses_price},
                   {"grid_exchange_kwh", eq.rho.grid_exchange}};
  j["storage_kwh"] = eq.storage.charge;
  j["certificate"] = {{"pass", cert.pass()},
                      {"follower_worst_margin", cert.follower_worst_margin},
                      {"leader_worst_margin", cert.leader_worst_margin},
                      {"follower_samples", cert.follower_samples},
                      {"leader_samples", cert.leader_samples},
                      {"tolerance", cert.tolerance}};
  j["ledger"] = {{"max_energy_gap_kwh", ledger.max_energy},
                 {"max_money_gap_cents", ledger.max_money}};
  ctx.write_json("equilibrium.json", j);
  write_timeseries_csv(ctx, scenario, report, &eq);

  std::ostringstream conv = ctx.open_csv();
  conv << "round,relative_change\n";
  for (std::size_t i = 0; i < eq.convergence.size(); ++i) {
    conv << (i + 1) << ',' << eq.convergence[i] << "\n";
  }
  ctx.write_text("convergence.csv", conv.str());

  if (!cert.pass()) {
    throw Error(ErrorCategory::kCertificate,
                "equilibrium certificate failed: follower margin " +
                    format_sci(cert.follower_worst_margin) + ", leader margin " +
                    format_sci(cert.leader_worst_margin));
  }
  std::cout << "equilibrium in " << eq.rounds << " rounds; PAR " << report.par
            << "; social cost " << report.social_cost_total << " cents\n";
  return 0;
}

int cmd_baseline(const Options& opt, const OutputContext& ctx) {
  const Scenario scenario = make_scenario(opt);
  const RunReport report = baseline_run(scenario);
  ctx.write_json("baseline.json", report_to_json(report));
  write_timeseries_csv(ctx, scenario, report, nullptr);
  std::cout << "baseline PAR " << report.par << "; social cost " << report.social_cost_total
            << " cents\n";
  return 0;
}

int cmd_ic_audit(const Options& opt, const OutputContext& ctx) {
  const Scenario scenario = make_scenario(opt);
  const EquilibriumResult eq = iterate(scenario, iterate_config(opt));
  const std::vector<std::vector<double>> declared = scenario.truthful_reports_by_step();
  const std::vector<std::string> ids = scenario.participating_ids();

  std::vector<std::size_t> audit_users;
  for (std::size_t n = 0; n < ids.size(); ++n) {
    if (opt.audit_user == "all" || opt.audit_user == ids[n]) audit_users.push_back(n);
  }
  NANSES_CHECK(!audit_users.empty(), ErrorCategory::kUsage,
               "no participating user matches --user " + opt.audit_user);
  std::vector<std::size_t> audit_steps;
  for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
    if (opt.audit_step < 0 || static_cast<std::size_t>(opt.audit_step) == t) {
      audit_steps.push_back(t);
    }
  }
  NANSES_CHECK(!audit_steps.empty(), ErrorCategory::kUsage, "audit step out of range");
  NANSES_CHECK(!opt.full_game || (audit_users.size() == 1 && audit_steps.size() == 1),
               ErrorCategory::kUsage,
               "--full-game audits a single --user and --step (it re-solves the whole game "
               "per candidate report)");

  std::ostringstream out = ctx.open_csv();
  out << "mode,user,step,declared_kwh,truthful,allocation_clamped,physically_feasible,"
         "grid_trade_kwh,payment_cents,cost_cents\n";

  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t n : audit_users) {
    for (std::size_t t : audit_steps) {
      const double truth = declared[t][n];
      const std::vector<double> grid = misreport_grid(truth, opt.audit_points);
      if (!opt.full_game) {
        const AuditTable table = ic_audit(n, truth, declared[t], eq.rho.at(t), scenario.tariff,
                                          eq.exogenous_load[t], t, grid);
        for (const AuditRow& row : table.rows) {
          out << "fixed-rho," << ids[n] << ',' << t << ',' << row.declared << ','
              << row.truthful << ',' << row.allocation_clamped << ','
              << row.physically_feasible << ',' << row.grid_trade << ',' << row.payment << ','
              << row.cost << "\n";
        }
        worst = std::max(worst, table.violation);
        if (!table.passes(opt.audit_tol)) ++violations;
      } else {
        // Full-game mode: re-solve the whole game per candidate report.
        // Truthfulness is only proven at fixed strategies, so this output is
        // exploratory, not certifying.
        double truthful_cost = 0.0, min_cost = 1e300;
        std::vector<std::pair<double, double>> rows;
        for (double candidate : grid) {
          std::vector<std::vector<double>> reports = declared;
          reports[t][n] = candidate;
          try {
            const EquilibriumResult game =
                iterate(scenario, iterate_config(opt), nullptr, &reports);
            double cost = 0.0;
            for (std::size_t t2 = 0; t2 < scenario.grid.steps; ++t2) {
              const Allocation& a2 = game.follower.allocations[t2];
              const double actual_x =
                  ses_trade_from_grid_trade(a2.grid_trades[n], declared[t2][n]);
              cost += user_cost(actual_x, game.payments[t2][n], game.rho.ses_price[t2]);
            }
            rows.emplace_back(candidate, cost);
            if (candidate == truth) truthful_cost = cost;
            min_cost = std::min(min_cost, cost);
          } catch (const Error&) {
            rows.emplace_back(candidate, std::numeric_limits<double>::quiet_NaN());
          }
        }
        for (const auto& [candidate, cost] : rows) {
          out << "full-game," << ids[n] << ',' << t << ',' << candidate << ','
              << (candidate == truth) << ",,,,," << cost << "\n";
        }
        worst = std::max(worst, truthful_cost - min_cost);
      }
    }
  }
  ctx.write_text("audit.csv", out.str());
  std::cout << (opt.full_game ? "full-game" : "fixed-rho") << " audit: worst violation "
            << format_sci(worst) << " cents over " << audit_users.size() << " user(s) x "
            << audit_steps.size() << " step(s)\n";
  if (!opt.full_game && (violations > 0 || worst > opt.audit_tol)) {
    throw Error(ErrorCategory::kCertificate,
                "incentive audit found " + std::to_string(violations) +
                    " dominance violations above " + format_sci(opt.audit_tol) + " cents");
  }
  return 0;
}

int cmd_sweep(const Options& opt, const OutputContext& ctx) {
  NANSES_CHECK(opt.scenario_path.empty(), ErrorCategory::kUsage,
               "sweep regenerates scenarios; use the generator options, not --scenario");
  std::ostringstream out = ctx.open_csv();
  out << "fraction,participating,par_baseline,par_system,par_reduction_pct,"
         "social_baseline_cents,social_system_cents,community_cost_cents,"
         "retailer_payoff_cents,participating_mean_cents,non_participating_mean_cents,"
         "rounds\n";
  for (double fraction : opt.fractions) {
    Options run = opt;
    run.fraction = fraction;
    run.generate = true;
    const Scenario scenario = make_scenario(run);
    const EquilibriumResult eq = iterate(scenario, iterate_config(opt));
    const RunReport sys = system_report(eq, scenario);
    const RunReport base = baseline_run(scenario);
    out << fraction << ',' << scenario.participating_count() << ',' << base.par << ','
        << sys.par << ',' << par_reduction(sys, base) << ',' << base.social_cost_total << ','
        << sys.social_cost_total << ',' << sys.community_cost << ',' << sys.payoff.cumulative
        << ',' << sys.groups.participating_mean << ',';
    if (sys.groups.has_non_participating) {
      out << sys.groups.non_participating_mean;
    }
    out << ',' << eq.rounds << "\n";
    std::cout << "fraction " << fraction << ": PAR reduction " << par_reduction(sys, base)
              << "%\n";
  }
  ctx.write_text("sweep.csv", out.str());
  return 0;
}

int cmd_noise_study(const Options& opt, const OutputContext& ctx) {
  const Scenario scenario = make_scenario(opt);
  std::ostringstream out = ctx.open_csv();
  out << "mape_percent,community_cost_cents,participating_mean_cents,"
         "non_participating_mean_cents,solves,clamped_samples\n";
  const std::vector<NoiseStudyRow> rows =
      noise_study(scenario, iterate_config(opt), opt.mape_max, opt.mape_step, opt.noise_draws);
  for (const NoiseStudyRow& row : rows) {
    out << row.mape << ',' << row.community_cost << ',' << row.participating_mean << ','
        << row.non_participating_mean << ',' << row.solves << ',' << row.clamped_samples
        << "\n";
    std::cout << "MAPE " << row.mape << "%: community " << row.community_cost
              << ", participating mean " << row.participating_mean << "\n";
  }
  ctx.write_text("noise_study.csv", out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg energy-trading simulator for a neighborhood network with shared "
               "storage"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd, bool scenario_input = true) {
    if (scenario_input) {
      cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file");
      cmd->add_flag("--generate", opt.generate, "generate the synthetic case study instead");
    }
    cmd->add_option("--users", opt.users, "total users for --generate");
    cmd->add_option("--fraction", opt.fraction, "participating fraction for --generate");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--daily-demand", opt.daily_demand, "base demand per household, kWh/day");
    cmd->add_option("--daily-pv", opt.daily_pv, "base PV per participating household, kWh/day");
    cmd->add_option("--capacity", opt.capacity, "SES capacity, kWh");
    cmd->add_option("--price-low", opt.price_low, "TOU calibration: low price, cents/kWh");
    cmd->add_option("--price-high", opt.price_high, "TOU calibration: high price, cents/kWh");
    cmd->add_option("--price-avg", opt.price_avg, "TOU calibration: mean price, cents/kWh");
    cmd->add_option("--tau", opt.tau, "best-response relative tolerance");
    cmd->add_option("--max-rounds", opt.max_rounds, "best-response round limit");
    cmd->add_option("--kkt-tol", opt.kkt_tol, "leader QP KKT tolerance");
    cmd->add_option("--p-min", opt.p_min, "SES price floor, cents/kWh");
    cmd->add_option("--relaxation", opt.relaxation, "best-response damping in (0, 1]");
    cmd->add_option("--certify-samples", opt.certify_samples,
                    "leader deviation samples in the certificate");
    cmd->add_option("--out", opt.out_dir, "output directory");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the Stackelberg equilibrium");
  add_common(solve);
  CLI::App* baseline = app.add_subcommand("baseline", "run the no-SES baseline");
  add_common(baseline);
  CLI::App* audit = app.add_subcommand("ic-audit", "misreport audit at the equilibrium");
  add_common(audit);
  audit->add_option("--user", opt.audit_user, "participating user id, or 'all'");
  audit->add_option("--step", opt.audit_step, "step index, or -1 for all");
  audit->add_option("--points", opt.audit_points, "misreport grid points");
  audit->add_option("--audit-tol", opt.audit_tol, "dominance tolerance, cents");
  audit->add_flag("--full-game", opt.full_game,
                  "re-solve the whole game per candidate (exploratory, non-certifying)");
  CLI::App* sweep = app.add_subcommand("sweep", "solve across participating fractions");
  add_common(sweep, /*scenario_input=*/false);
  sweep->add_option("--fractions", opt.fractions, "participating fractions to sweep");
  CLI::App* noise = app.add_subcommand("noise-study", "forecast-noise sensitivity study");
  add_common(noise);
  noise->add_option("--mape-max", opt.mape_max, "largest MAPE dial, percent");
  noise->add_option("--mape-step", opt.mape_step, "MAPE increment, percent");
  noise->add_option("--draws", opt.noise_draws, "antithetic noise pairs per level");
  CLI::App* generate = app.add_subcommand("generate", "write the synthetic scenario JSON");
  add_common(generate, /*scenario_input=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (sweep->parsed() || generate->parsed()) opt.generate = true;

  OutputContext ctx;
  ctx.dir = opt.out_dir;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.hash = config_digest(opt, ctx.command);
  ctx.seed = opt.seed;

  try {
    std::filesystem::create_directories(ctx.dir);
    if (solve->parsed()) return cmd_solve(opt, ctx);
    if (baseline->parsed()) return cmd_baseline(opt, ctx);
    if (audit->parsed()) return cmd_ic_audit(opt, ctx);
    if (sweep->parsed()) return cmd_sweep(opt, ctx);
    if (noise->parsed()) return cmd_noise_study(opt, ctx);
    if (generate->parsed()) return cmd_generate(opt, ctx);
  } catch (const Error& e) {
    json err{{"error", {{"category", e.category_name()}, {"message", e.what()}}}};
    try {
      ctx.write_json("error.json", err);
    } catch (...) {
    }
    std::cerr << "error (" << e.category_name() << "): " << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::kUsage: return 1;
      case ErrorCategory::kInfeasible:
      case ErrorCategory::kValidation:
      case ErrorCategory::kMechanism: return 2;
      case ErrorCategory::kNonConvergence: return 3;
      case ErrorCategory::kCertificate: return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
