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

#ifndef NANSES_RETAILER_HPP_
#define NANSES_RETAILER_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/pricing.hpp"

namespace nanses {

// The leader's decision at one step: the SES unit price and the SES<->grid
// exchange (positive = SES charges from the grid).
struct LeaderStrategyPoint {
  double ses_price = 0.0;      // p_s, cents/kWh
  double grid_exchange = 0.0;  // e_s, kWh
};

// Sign pattern of the declared surpluses at a step. Users declaring exactly
// zero are compatible with either type and are excluded from the proportional
// allocation rule.
enum class ReportTypes {
  kAllSurplus,   // every nonzero declaration is positive
  kAllDeficit,   // every nonzero declaration is negative
  kMixed,        // both signs present
  kAllZero,      // no nonzero declaration
};

inline ReportTypes classify_reports(const std::vector<double>& declared) {
  bool has_pos = false, has_neg = false;
  for (double s : declared) {
    if (s > 0.0) has_pos = true;
    if (s < 0.0) has_neg = true;
  }
  if (has_pos && has_neg) return ReportTypes::kMixed;
  if (has_pos) return ReportTypes::kAllSurplus;
  if (has_neg) return ReportTypes::kAllDeficit;
  return ReportTypes::kAllZero;
}

// Aggregate grid trades compatible with the per-user bounds: summing the
// per-user intervals gives [-sum s, 0] when all declarations are surplus,
// [0, -sum s] when all are deficit, and exactly {0} otherwise.
inline Interval feasible_aggregate_interval(const std::vector<double>& declared) {
  const double total = sum(declared);
  switch (classify_reports(declared)) {
    case ReportTypes::kAllSurplus: return {-total, 0.0};
    case ReportTypes::kAllDeficit: return {0.0, -total};
    case ReportTypes::kMixed:
    case ReportTypes::kAllZero: return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

// Unconstrained minimizer of the social cost in the aggregate participating
// grid load: E_P = (phi^-1 (p_s - delta) - E_N - e_s) / 2. Reports do not
// enter; they only shape the feasible interval.
inline double optimal_aggregate(const LeaderStrategyPoint& rho, const TariffParams& tariff,
                                double exogenous_load, std::size_t t) {
  return 0.5 * ((rho.ses_price - tariff.delta[t]) / tariff.phi[t] - exogenous_load -
                rho.grid_exchange);
}

// Per-user outcome of the retailer's allocation at one step.
struct Allocation {
  std::vector<double> grid_trades;  // e-hat per participating user
  std::vector<double> ses_trades;   // x-hat per participating user
  double aggregate = 0.0;           // E_P = sum of grid trades
};

// Splits an aggregate grid trade across users proportionally to their
// declared surpluses when all declarations share one sign, and assigns zero
// trades when both signs are present. Zero declarations always get zero.
// aggregate must already lie in the feasible interval (up to tol); values
// within tol are snapped onto it.
inline Allocation allocate(double aggregate, const std::vector<double>& declared,
                           double tol = 1e-7) {
  const Interval box = feasible_aggregate_interval(declared);
  NANSES_CHECK(box.contains(aggregate, tol), ErrorCategory::kInfeasible,
               "allocate: aggregate " + std::to_string(aggregate) +
                   " outside the feasible interval [" + std::to_string(box.lo) + ", " +
                   std::to_string(box.hi) + "]");
  const double snapped = box.clamp(aggregate);

  Allocation out;
  out.grid_trades.assign(declared.size(), 0.0);
  out.ses_trades.assign(declared.size(), 0.0);

  const ReportTypes types = classify_reports(declared);
  if (types == ReportTypes::kAllSurplus || types == ReportTypes::kAllDeficit) {
    const double total = sum(declared);
    // total == 0 can only happen here if every declaration is zero, which
    // classify_reports maps to kAllZero, so the division is safe.
    for (std::size_t n = 0; n < declared.size(); ++n) {
      if (declared[n] != 0.0) out.grid_trades[n] = snapped * declared[n] / total;
    }
  }
  for (std::size_t n = 0; n < declared.size(); ++n) {
    out.ses_trades[n] = ses_trade_from_grid_trade(out.grid_trades[n], declared[n]);
    out.aggregate += out.grid_trades[n];
  }
  return out;
}

// Social cost at one step in the direct per-user form:
// sum_n (-p_s x_n + p_g e_n) with p_g evaluated at the realized total load.
inline double social_cost(const Allocation& allocation, const LeaderStrategyPoint& rho,
                          const TariffParams& tariff, double exogenous_load, std::size_t t) {
  const double total_load = rho.grid_exchange + exogenous_load + allocation.aggregate;
  const double p_g = grid_price(total_load, t, tariff);
  double cost = 0.0;
  for (std::size_t n = 0; n < allocation.grid_trades.size(); ++n) {
    cost += -rho.ses_price * allocation.ses_trades[n] + p_g * allocation.grid_trades[n];
  }
  return cost;
}

// The same social cost as a quadratic in the aggregate E_P alone:
// phi E_P^2 + (phi (E_N + e_s) + delta - p_s) E_P - p_s sum_n s_n.
inline double social_cost_quadratic(double aggregate, const LeaderStrategyPoint& rho,
                                    const TariffParams& tariff, double exogenous_load,
                                    std::size_t t, double declared_total) {
  return tariff.phi[t] * aggregate * aggregate +
         (tariff.phi[t] * (exogenous_load + rho.grid_exchange) + tariff.delta[t] -
          rho.ses_price) *
             aggregate -
         rho.ses_price * declared_total;
}

// Result of the retailer's constrained optimum at one step. The aggregate is
// the unconstrained optimum projected onto the feasible interval; `clamped`
// records whether the projection moved it.
struct FollowerStep {
  Allocation allocation;
  double unconstrained_aggregate = 0.0;
  bool clamped = false;
};

// Solves the retailer's per-step problem for given leader strategy and
// declared surpluses: project the closed-form optimum onto the feasible
// interval, then apply the proportional rule.
inline FollowerStep solve_follower_step(const LeaderStrategyPoint& rho,
                                        const TariffParams& tariff, double exogenous_load,
                                        std::size_t t, const std::vector<double>& declared) {
  FollowerStep step;
  step.unconstrained_aggregate = optimal_aggregate(rho, tariff, exogenous_load, t);
  const Interval box = feasible_aggregate_interval(declared);
  const double feasible_aggregate = box.clamp(step.unconstrained_aggregate);
  step.clamped =
      std::abs(feasible_aggregate - step.unconstrained_aggregate) > 1e-12 *
          (1.0 + std::abs(step.unconstrained_aggregate));
  step.allocation = allocate(feasible_aggregate, declared);
  return step;
}

// The leader's strategy over the whole horizon.
struct LeaderStrategy {
  std::vector<double> ses_price;      // p_s per step
  std::vector<double> grid_exchange;  // e_s per step

  LeaderStrategyPoint at(std::size_t t) const { return {ses_price[t], grid_exchange[t]}; }
  std::size_t steps() const { return ses_price.size(); }
};

// Everything the retailer announces back to the SES provider after one
// best-response pass, plus the full allocation detail kept for reporting.
struct FollowerResponse {
  std::vector<double> aggregate;         // E_P(t) after projection
  std::vector<double> ses_totals;        // sum_n x_n(t)
  std::vector<double> charge_totals;     // sum_n max(x_n(t), 0)
  std::vector<double> discharge_totals;  // sum_n max(-x_n(t), 0)
  std::vector<bool> clamped;             // projection was active at t
  std::vector<Allocation> allocations;
};

inline FollowerResponse compute_follower_response(
    const LeaderStrategy& rho, const TariffParams& tariff,
    const std::vector<double>& exogenous_load,
    const std::vector<std::vector<double>>& declared_by_step) {
  const std::size_t steps = rho.steps();
  FollowerResponse resp;
  resp.aggregate.resize(steps);
  resp.ses_totals.resize(steps);
  resp.charge_totals.assign(steps, 0.0);
  resp.discharge_totals.assign(steps, 0.0);
  resp.clamped.resize(steps);
  resp.allocations.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    FollowerStep step =
        solve_follower_step(rho.at(t), tariff, exogenous_load[t], t, declared_by_step[t]);
    resp.aggregate[t] = step.allocation.aggregate;
    resp.clamped[t] = step.clamped;
    for (double x : step.allocation.ses_trades) {
      resp.ses_totals[t] += x;
      if (x > 0.0) {
        resp.charge_totals[t] += x;
      } else {
        resp.discharge_totals[t] -= x;
      }
    }
    resp.allocations[t] = std::move(step.allocation);
  }
  return resp;
}

}  // namespace nanses

#endif  // NANSES_RETAILER_HPP_
