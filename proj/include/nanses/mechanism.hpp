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

#ifndef NANSES_MECHANISM_HPP_
#define NANSES_MECHANISM_HPP_

// Pivot-style payments for the retailer's allocation. Each participating
// user pays the grid cost of their own trade plus the externality they impose
// on everyone else: the others' social cost with the user present minus the
// others' social cost after re-solving with the user removed from the system
// (the Clarke tax). When the removal leaves the aggregate optimum feasible,
// the whole expression collapses to p_s * e_n, which is the unit price the
// retailer actually charges.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/pricing.hpp"
#include "nanses/retailer.hpp"

namespace nanses {

// Payment of one user at one step under the adopted uniform-price rule.
inline double simplified_payment(double grid_trade, double ses_price) {
  return ses_price * grid_trade;
}

// Personal cost: what the user pays the SES provider plus the retailer
// payment. Negative values are net income.
inline double user_cost(double ses_trade, double payment, double ses_price) {
  return -ses_price * ses_trade + payment;
}

struct PaymentRecord {
  double payment = 0.0;        // k_n, cents (negative = income)
  double ses_component = 0.0;  // -p_s * x_n
  double total_cost = 0.0;     // C_n = ses_component + payment
};

inline PaymentRecord make_payment_record(double ses_price, double ses_trade, double payment) {
  PaymentRecord rec;
  rec.payment = payment;
  rec.ses_component = -ses_price * ses_trade;
  rec.total_cost = rec.ses_component + payment;
  return rec;
}

// Social cost borne by everyone except `skip` under a given allocation.
inline double others_social_cost(const Allocation& allocation, std::size_t skip,
                                 double ses_price, double p_g) {
  double cost = 0.0;
  for (std::size_t m = 0; m < allocation.grid_trades.size(); ++m) {
    if (m == skip) continue;
    cost += -ses_price * allocation.ses_trades[m] + p_g * allocation.grid_trades[m];
  }
  return cost;
}

// Full pivot payment for user n at step t. Both the with-n and the without-n
// retailer problems are re-solved (the without-n instance drops the user from
// the system entirely, so the exogenous load is unchanged).
inline double clarke_payment(std::size_t n, const std::vector<double>& declared,
                             const LeaderStrategyPoint& rho, const TariffParams& tariff,
                             double exogenous_load, std::size_t t) {
  NANSES_CHECK(n < declared.size(), ErrorCategory::kMechanism,
               "clarke_payment: user index out of range");
  const FollowerStep full = solve_follower_step(rho, tariff, exogenous_load, t, declared);
  const double p_g = grid_price(
      rho.grid_exchange + exogenous_load + full.allocation.aggregate, t, tariff);
  const double h_with = others_social_cost(full.allocation, n, rho.ses_price, p_g);

  std::vector<double> reduced = declared;
  reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(n));
  const FollowerStep without = solve_follower_step(rho, tariff, exogenous_load, t, reduced);
  const double p_g_without = grid_price(
      rho.grid_exchange + exogenous_load + without.allocation.aggregate, t, tariff);
  const double h_without =
      others_social_cost(without.allocation, reduced.size(), rho.ses_price, p_g_without);

  return p_g * full.allocation.grid_trades[n] + h_with - h_without;
}

// Price bound of the retailer's non-negativity condition: p_s compared
// against M(t) = phi (e_s + E_N) + delta, with the side picked from the sign
// of the total user load.
inline double payoff_condition_bound(double grid_exchange, double exogenous_load,
                                     const TariffParams& tariff, std::size_t t) {
  return tariff.phi[t] * (grid_exchange + exogenous_load) + tariff.delta[t];
}

struct RetailerPayoff {
  std::vector<double> per_step;  // U(t) = (p_s - p_g) E_A
  double cumulative = 0.0;
};

inline RetailerPayoff retailer_payoff(const std::vector<double>& ses_prices,
                                      const std::vector<double>& grid_prices,
                                      const std::vector<double>& user_total_load) {
  RetailerPayoff out;
  out.per_step.resize(ses_prices.size());
  for (std::size_t t = 0; t < ses_prices.size(); ++t) {
    out.per_step[t] = (ses_prices[t] - grid_prices[t]) * user_total_load[t];
    out.cumulative += out.per_step[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Incentive-compatibility audit.

struct AuditRow {
  double declared = 0.0;            // candidate report for the audited user
  bool truthful = false;
  bool allocation_clamped = false;  // fixed rho not optimal-feasible for this profile
  bool physically_feasible = true;  // assigned trade inside the user's true bounds
  double grid_trade = 0.0;          // e_n assigned by the allocator
  double assigned_ses_trade = 0.0;  // x_n the allocator believes
  double actual_ses_trade = 0.0;    // x_n from the true energy balance
  double payment = 0.0;             // pivot payment k_n
  double cost = 0.0;                // actual personal cost C_n
};

struct AuditTable {
  std::size_t user = 0;
  std::size_t step = 0;
  double true_surplus = 0.0;
  std::vector<AuditRow> rows;
  std::size_t truthful_row = 0;
  double truthful_cost = 0.0;
  double min_cost = 0.0;
  double violation = 0.0;  // max(0, truthful_cost - min_cost)

  bool passes(double tol = 1e-7) const { return violation <= tol; }
};

// Default misreport grid: `points` evenly spaced values spanning the truth
// +/- 100% (at least +/- 0.5 kWh), with the truth pinned exactly.
inline std::vector<double> misreport_grid(double true_surplus, std::size_t points = 41) {
  NANSES_CHECK(points >= 3, ErrorCategory::kUsage, "misreport grid needs at least 3 points");
  const double half_width = std::max(std::abs(true_surplus), 0.5);
  std::vector<double> grid(points);
  const std::ptrdiff_t mid = static_cast<std::ptrdiff_t>(points / 2);
  for (std::size_t k = 0; k < points; ++k) {
    const double offset =
        static_cast<double>(static_cast<std::ptrdiff_t>(k) - mid) / static_cast<double>(mid);
    grid[k] = true_surplus + offset * half_width;
  }
  grid[static_cast<std::size_t>(mid)] = true_surplus;
  return grid;
}

// Sweeps candidate reports for one user at one step while everyone else's
// report and the leader strategy stay fixed. Every row re-runs the retailer
// allocation on the altered profile and prices the pivot payment against the
// shared without-user sub-instance; the user's actual cost uses the true
// surplus in the energy balance regardless of what was declared.
inline AuditTable ic_audit(std::size_t user, double true_surplus,
                           const std::vector<double>& declared,
                           const LeaderStrategyPoint& rho, const TariffParams& tariff,
                           double exogenous_load, std::size_t t,
                           const std::vector<double>& candidates) {
  NANSES_CHECK(user < declared.size(), ErrorCategory::kMechanism,
               "ic_audit: user index out of range");
  AuditTable table;
  table.user = user;
  table.step = t;
  table.true_surplus = true_surplus;

  // Without-user sub-instance, shared by every row.
  std::vector<double> reduced = declared;
  reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(user));
  const FollowerStep without = solve_follower_step(rho, tariff, exogenous_load, t, reduced);
  const double p_g_without = grid_price(
      rho.grid_exchange + exogenous_load + without.allocation.aggregate, t, tariff);
  const double h_without =
      others_social_cost(without.allocation, reduced.size(), rho.ses_price, p_g_without);

  const Interval true_bounds = user_grid_bounds(true_surplus);
  std::vector<double> profile = declared;
  table.rows.reserve(candidates.size());
  table.min_cost = 1e300;
  for (double candidate : candidates) {
    profile[user] = candidate;
    const FollowerStep step = solve_follower_step(rho, tariff, exogenous_load, t, profile);
    const double p_g = grid_price(
        rho.grid_exchange + exogenous_load + step.allocation.aggregate, t, tariff);
    AuditRow row;
    row.declared = candidate;
    row.truthful = candidate == true_surplus;
    row.allocation_clamped = step.clamped;
    row.grid_trade = step.allocation.grid_trades[user];
    row.assigned_ses_trade = step.allocation.ses_trades[user];
    row.actual_ses_trade = ses_trade_from_grid_trade(row.grid_trade, true_surplus);
    row.physically_feasible = true_bounds.contains(row.grid_trade, 1e-12);
    row.payment = p_g * row.grid_trade +
                  others_social_cost(step.allocation, user, rho.ses_price, p_g) - h_without;
    row.cost = user_cost(row.actual_ses_trade, row.payment, rho.ses_price);
    if (row.truthful) {
      table.truthful_row = table.rows.size();
      table.truthful_cost = row.cost;
    }
    table.min_cost = std::min(table.min_cost, row.cost);
    table.rows.push_back(row);
  }
  table.violation = std::max(0.0, table.truthful_cost - table.min_cost);
  return table;
}

}  // namespace nanses

#endif  // NANSES_MECHANISM_HPP_
