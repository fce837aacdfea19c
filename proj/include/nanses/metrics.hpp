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

#ifndef NANSES_METRICS_HPP_
#define NANSES_METRICS_HPP_

// Reported quantities: the no-SES baseline, peak-to-average ratio, social and
// community cost, per-group user costs, and the per-step energy/money ledger.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/mechanism.hpp"
#include "nanses/pricing.hpp"
#include "nanses/scenario.hpp"
#include "nanses/stackelberg.hpp"

namespace nanses {

inline double peak_to_average(const std::vector<double>& load) {
  NANSES_CHECK(!load.empty(), ErrorCategory::kUsage, "PAR needs a non-empty load");
  double peak = load[0], mean = 0.0;
  for (double v : load) {
    peak = std::max(peak, v);
    mean += v;
  }
  mean /= static_cast<double>(load.size());
  NANSES_CHECK(mean > 0.0, ErrorCategory::kValidation, "PAR needs a positive mean load");
  return peak / mean;
}

struct GroupCosts {
  bool has_participating = false;
  double participating_mean = 0.0;
  bool has_non_participating = false;
  double non_participating_mean = 0.0;
};

struct RunReport {
  std::string kind;  // "system" or "baseline"
  std::vector<double> total_load;
  std::vector<double> grid_prices;
  std::vector<double> ses_prices;  // baseline: equal to grid prices
  std::vector<double> social_cost_per_step;
  double social_cost_total = 0.0;
  double community_cost = 0.0;
  RetailerPayoff payoff;
  double par = 0.0;
  GroupCosts groups;
  std::vector<std::pair<std::string, double>> user_daily_costs;
};

// Baseline without an SES: participating users trade only with the grid at
// the unit price p_g, so their grid trades are exactly -s_n.
inline RunReport baseline_run(const Scenario& scenario) {
  scenario.validate();
  RunReport report;
  report.kind = "baseline";
  report.total_load = scenario.baseline_load();
  const LoadReport load_check = validate_total_load(report.total_load, scenario.tariff);
  if (!load_check.ok()) {
    throw Error(ErrorCategory::kValidation,
                "baseline load leaves (0, E_max) at step " +
                    std::to_string(load_check.violations[0].step));
  }
  const std::size_t steps = scenario.grid.steps;
  report.grid_prices.resize(steps);
  report.social_cost_per_step.assign(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    report.grid_prices[t] = grid_price(report.total_load[t], t, scenario.tariff);
  }
  report.ses_prices = report.grid_prices;
  report.payoff.per_step.assign(steps, 0.0);

  double participating_sum = 0.0, non_participating_sum = 0.0;
  std::size_t participating = 0, non_participating = 0;
  for (const auto& u : scenario.users) {
    double cost = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double net_demand = u.demand[t] - u.generation[t];
      cost += report.grid_prices[t] * net_demand;
      if (u.participating) report.social_cost_per_step[t] += report.grid_prices[t] * net_demand;
    }
    report.user_daily_costs.emplace_back(u.id, cost);
    if (u.participating) {
      participating_sum += cost;
      ++participating;
    } else {
      non_participating_sum += cost;
      ++non_participating;
    }
  }
  report.social_cost_total = sum(report.social_cost_per_step);
  // No SES provider and a zero retailer margin: the community cost reduces to
  // the participating users' grid bill.
  report.community_cost = report.social_cost_total;
  report.par = peak_to_average(report.total_load);
  report.groups.has_participating = participating > 0;
  if (participating > 0) {
    report.groups.participating_mean = participating_sum / static_cast<double>(participating);
  }
  report.groups.has_non_participating = non_participating > 0;
  if (non_participating > 0) {
    report.groups.non_participating_mean =
        non_participating_sum / static_cast<double>(non_participating);
  }
  return report;
}

// Community cost of the equilibrium: grid bill of the whole system minus the
// non-participating users' contribution priced at the SES rate; equals the
// summed costs of the SES provider, the participating users, and the
// retailer.
inline double community_cost(const EquilibriumResult& result, const Scenario& scenario) {
  double total = 0.0;
  for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
    const double e_a = result.follower.aggregate[t] + result.exogenous_load[t];
    total += result.grid_prices[t] * (result.rho.grid_exchange[t] + e_a) -
             result.rho.ses_price[t] * result.exogenous_load[t];
  }
  return total;
}

// Daily personal cost of the participating user in the given report column.
inline double participating_daily_cost(const EquilibriumResult& result, std::size_t column) {
  double cost = 0.0;
  for (std::size_t t = 0; t < result.rho.steps(); ++t) {
    const Allocation& alloc = result.follower.allocations[t];
    const PaymentRecord record = make_payment_record(
        result.rho.ses_price[t], alloc.ses_trades[column], result.payments[t][column]);
    cost += record.total_cost;
  }
  return cost;
}

inline GroupCosts group_costs(const EquilibriumResult& result, const Scenario& scenario) {
  GroupCosts groups;
  double part_sum = 0.0, non_sum = 0.0;
  std::size_t part = 0, non = 0;
  std::size_t column = 0;
  for (const auto& u : scenario.users) {
    if (u.participating) {
      part_sum += participating_daily_cost(result, column);
      ++part;
      ++column;
    } else {
      double cost = 0.0;
      for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
        cost += result.rho.ses_price[t] * (u.demand[t] - u.generation[t]);
      }
      non_sum += cost;
      ++non;
    }
  }
  groups.has_participating = part > 0;
  if (part > 0) groups.participating_mean = part_sum / static_cast<double>(part);
  groups.has_non_participating = non > 0;
  if (non > 0) groups.non_participating_mean = non_sum / static_cast<double>(non);
  return groups;
}

inline RunReport system_report(const EquilibriumResult& result, const Scenario& scenario) {
  RunReport report;
  report.kind = "system";
  report.total_load = result.total_load;
  report.grid_prices = result.grid_prices;
  report.ses_prices = result.rho.ses_price;
  const std::size_t steps = scenario.grid.steps;
  report.social_cost_per_step.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    report.social_cost_per_step[t] =
        social_cost(result.follower.allocations[t], result.rho.at(t), scenario.tariff,
                    result.exogenous_load[t], t);
  }
  report.social_cost_total = sum(report.social_cost_per_step);
  report.community_cost = community_cost(result, scenario);
  report.payoff = result.payoff;
  report.par = peak_to_average(result.total_load);
  report.groups = group_costs(result, scenario);

  std::size_t column = 0;
  for (const auto& u : scenario.users) {
    double cost = 0.0;
    if (u.participating) {
      cost = participating_daily_cost(result, column);
      ++column;
    } else {
      for (std::size_t t = 0; t < steps; ++t) {
        cost += result.rho.ses_price[t] * (u.demand[t] - u.generation[t]);
      }
    }
    report.user_daily_costs.emplace_back(u.id, cost);
  }
  return report;
}

// Percent improvement of the peak-to-average ratio over the baseline.
inline double par_reduction(const RunReport& system, const RunReport& baseline) {
  return 100.0 * (baseline.par - system.par) / baseline.par;
}

struct LedgerResiduals {
  double max_energy = 0.0;  // |E - (e_s + E_N + E_P)|
  double max_money = 0.0;   // four-party cash flows against the retailer payoff
};

struct NoiseStudyRow {
  double mape = 0.0;
  double community_cost = 0.0;
  double participating_mean = 0.0;
  double non_participating_mean = 0.0;
  std::size_t solves = 0;
  std::size_t clamped_samples = 0;
};

// Forecast-noise sensitivity: equilibria are re-solved on noisy copies of the
// scenario for each MAPE level and averaged. Draws come in antithetic pairs
// sharing their Gaussian sequences across levels (common random numbers), so
// level-to-level differences reflect the noise scale rather than sampling
// luck.
inline std::vector<NoiseStudyRow> noise_study(const Scenario& scenario,
                                              const IterateConfig& config, double mape_max,
                                              double mape_step, std::size_t pairs) {
  NANSES_CHECK(mape_step > 0.0, ErrorCategory::kUsage, "mape step must be positive");
  NANSES_CHECK(pairs >= 1, ErrorCategory::kUsage, "noise study needs at least one pair");
  Rng seeds(scenario.seed ^ 0x6e015eULL);
  std::vector<std::uint64_t> draw_seeds(pairs);
  for (auto& s : draw_seeds) s = seeds.next_u64();

  std::vector<NoiseStudyRow> rows;
  for (double mape = 0.0; mape <= mape_max + 1e-9; mape += mape_step) {
    NoiseStudyRow row;
    row.mape = mape;
    const std::size_t level_pairs = mape == 0.0 ? 1 : pairs;
    for (std::size_t d = 0; d < level_pairs; ++d) {
      for (int sign = 0; sign < (mape == 0.0 ? 1 : 2); ++sign) {
        const NoiseSpec spec{mape, draw_seeds[d], sign == 1};
        const NoisyScenario noisy = apply_forecast_noise(scenario, spec);
        row.clamped_samples += noisy.clamped_samples;
        const EquilibriumResult eq = iterate(noisy.scenario, config);
        const RunReport report = system_report(eq, noisy.scenario);
        row.community_cost += report.community_cost;
        row.participating_mean += report.groups.participating_mean;
        if (report.groups.has_non_participating) {
          row.non_participating_mean += report.groups.non_participating_mean;
        }
        ++row.solves;
      }
    }
    row.community_cost /= static_cast<double>(row.solves);
    row.participating_mean /= static_cast<double>(row.solves);
    row.non_participating_mean /= static_cast<double>(row.solves);
    rows.push_back(row);
  }
  return rows;
}

// Re-derives both per-step balances from scratch: total grid load from its
// components, and the retailer's payoff from the individual cash flows
// (user payments, non-participating sales at p_s, the SES provider's grid
// settlement, and the retailer's grid bill).
inline LedgerResiduals ledger_residuals(const EquilibriumResult& result,
                                        const Scenario& scenario) {
  LedgerResiduals res;
  const std::vector<double> e_n = scenario.exogenous_load();
  for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
    const Allocation& alloc = result.follower.allocations[t];
    double aggregate = 0.0, payments = 0.0;
    for (std::size_t n = 0; n < alloc.grid_trades.size(); ++n) {
      aggregate += alloc.grid_trades[n];
      payments += result.payments[t][n];
    }
    const double energy_gap = result.total_load[t] -
                              (result.rho.grid_exchange[t] + e_n[t] + aggregate);
    res.max_energy = std::max(res.max_energy, std::abs(energy_gap));

    const double p_g = result.grid_prices[t];
    const double retailer_income = payments + result.rho.ses_price[t] * e_n[t] +
                                   p_g * result.rho.grid_exchange[t];
    const double retailer_bill = p_g * result.total_load[t];
    const double money_gap = retailer_income - retailer_bill - result.payoff.per_step[t];
    res.max_money = std::max(res.max_money, std::abs(money_gap));
  }
  return res;
}

}  // namespace nanses

#endif  // NANSES_METRICS_HPP_
