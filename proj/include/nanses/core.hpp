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

#ifndef NANSES_CORE_HPP_
#define NANSES_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nanses/common.hpp"

namespace nanses {

// Time axis of the model: a horizon of H equal steps. All per-horizon series
// have length exactly H; step indices are 0-based internally.
struct TimeGrid {
  std::size_t steps = 0;       // H
  double step_hours = 0.5;

  double horizon_hours() const { return static_cast<double>(steps) * step_hours; }

  // Hour-of-day at which step t begins, assuming the horizon starts at 00:00.
  double step_start_hour(std::size_t t) const {
    return std::fmod(static_cast<double>(t) * step_hours, 24.0);
  }

  void validate() const {
    NANSES_CHECK(steps >= 1, ErrorCategory::kUsage, "time grid needs at least one step");
    NANSES_CHECK(step_hours > 0.0, ErrorCategory::kUsage, "step_hours must be positive");
  }
};

// One user: demand and generation series plus whether they take part in the
// SES trading scheme. Non-participating users only contribute exogenous load.
struct UserProfile {
  std::string id;
  std::vector<double> demand;      // kWh per step, >= 0
  std::vector<double> generation;  // kWh per step, >= 0
  bool participating = false;

  void validate(const TimeGrid& grid) const {
    check_length(demand, grid.steps, "user " + id + " demand");
    check_length(generation, grid.steps, "user " + id + " generation");
    for (std::size_t t = 0; t < grid.steps; ++t) {
      NANSES_CHECK(demand[t] >= 0.0, ErrorCategory::kUsage,
                   "user " + id + " has negative demand at step " + std::to_string(t));
      NANSES_CHECK(generation[t] >= 0.0, ErrorCategory::kUsage,
                   "user " + id + " has negative generation at step " + std::to_string(t));
    }
  }
};

// Surplus energy of a user at step t: generation minus demand. Positive means
// the user has energy to sell, negative means a deficit to cover.
inline double surplus(const UserProfile& profile, std::size_t t) {
  if (t >= profile.demand.size() || t >= profile.generation.size()) {
    throw Error(ErrorCategory::kUsage,
                "surplus: step " + std::to_string(t) + " out of range for user " + profile.id);
  }
  return profile.generation[t] - profile.demand[t];
}

inline std::vector<double> surplus_series(const UserProfile& profile) {
  std::vector<double> s(profile.demand.size());
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = profile.generation[t] - profile.demand[t];
  return s;
}

// A participating user's declared surplus series. Users may misreport, so the
// declared values carry no sign or consistency constraint.
struct SurplusReport {
  std::string user_id;
  std::vector<double> declared;  // kWh per step
};

// Grid trade implied by an SES trade under the per-user energy balance
// e = x - s. Positive e buys from the grid, positive x sells to the SES.
inline double grid_trade_from_ses_trade(double ses_trade, double declared_surplus) {
  return ses_trade - declared_surplus;
}

inline double ses_trade_from_grid_trade(double grid_trade, double declared_surplus) {
  return grid_trade + declared_surplus;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  double clamp(double v) const { return std::min(std::max(v, lo), hi); }
};

// Feasible grid trades for a user given their declared surplus: a surplus
// user may sell at most what they declared, a deficit user may buy at most
// what they are short by.
inline Interval user_grid_bounds(double declared_surplus) {
  if (declared_surplus > 0.0) return {-declared_surplus, 0.0};
  if (declared_surplus < 0.0) return {0.0, -declared_surplus};
  return {0.0, 0.0};
}

// Physical parameters of the shared storage.
struct SesParams {
  double capacity = 0.0;          // Q_M, kWh
  double leakage = 1.0;           // alpha per step, in (0, 1]
  double charge_eff = 1.0;        // eta+, in (0, 1]
  double discharge_eff = 1.0;     // eta-, >= 1
  double initial_charge = 0.0;    // b(0), kWh in [0, Q_M]

  void validate() const {
    NANSES_CHECK(capacity > 0.0, ErrorCategory::kUsage, "SES capacity must be positive");
    NANSES_CHECK(leakage > 0.0 && leakage <= 1.0, ErrorCategory::kUsage,
                 "SES leakage must lie in (0, 1]");
    NANSES_CHECK(charge_eff > 0.0 && charge_eff <= 1.0, ErrorCategory::kUsage,
                 "SES charge efficiency must lie in (0, 1]");
    NANSES_CHECK(discharge_eff >= 1.0, ErrorCategory::kUsage,
                 "SES discharge inefficiency must be >= 1");
    NANSES_CHECK(initial_charge >= 0.0 && initial_charge <= capacity, ErrorCategory::kUsage,
                 "SES initial charge must lie in [0, capacity]");
  }
};

// Directional decomposition of a net energy flow. Signed net values are the
// canonical representation everywhere; the split is derived on demand, so the
// complementarity f+ * f- = 0 holds by construction.
struct FlowSplit {
  double charge = 0.0;     // f+, kWh >= 0
  double discharge = 0.0;  // f-, kWh >= 0

  static FlowSplit from_net(double net) {
    if (net >= 0.0) return {net, 0.0};
    return {0.0, -net};
  }

  double net() const { return charge - discharge; }
};

// Charge level after one step: leakage on the previous level, plus charging
// flows scaled by eta+, minus discharging flows scaled by eta-. ses_flow is
// the SES<->grid exchange, user_total the aggregate of per-user SES trades.
inline double step_charge(double charge_prev, const FlowSplit& ses_flow,
                          const FlowSplit& user_total, const SesParams& params) {
  return params.leakage * charge_prev +
         params.charge_eff * (ses_flow.charge + user_total.charge) -
         params.discharge_eff * (ses_flow.discharge + user_total.discharge);
}

// Storage state over the horizon; charge[t] is the level at the end of step t.
struct SesState {
  SesParams params;
  std::vector<double> charge;
};

// Runs step_charge over the whole horizon from b(0) = params.initial_charge.
inline SesState simulate_trajectory(const SesParams& params,
                                    const std::vector<FlowSplit>& ses_flows,
                                    const std::vector<FlowSplit>& user_totals) {
  NANSES_CHECK(ses_flows.size() == user_totals.size(), ErrorCategory::kUsage,
               "simulate_trajectory: flow series lengths differ");
  SesState state{params, std::vector<double>(ses_flows.size())};
  double level = params.initial_charge;
  for (std::size_t t = 0; t < ses_flows.size(); ++t) {
    level = step_charge(level, ses_flows[t], user_totals[t], params);
    state.charge[t] = level;
  }
  return state;
}

struct TrajectoryViolation {
  std::size_t step;
  double amount;  // kWh outside [0, Q_M]; positive above capacity, negative below zero
};

struct TrajectoryReport {
  std::vector<TrajectoryViolation> bound_violations;
  double boundary_error = 0.0;  // b(H) - b(0)
  bool boundary_ok = true;

  bool ok() const { return bound_violations.empty() && boundary_ok; }
};

// Checks capacity bounds at every step and the periodic boundary condition
// b(H) = b(0). Failures are data, not exceptions.
inline TrajectoryReport validate_trajectory(const SesState& state, double tol = 1e-6) {
  TrajectoryReport report;
  for (std::size_t t = 0; t < state.charge.size(); ++t) {
    const double b = state.charge[t];
    if (b < -tol) {
      report.bound_violations.push_back({t, b});
    } else if (b > state.params.capacity + tol) {
      report.bound_violations.push_back({t, b - state.params.capacity});
    }
  }
  const double b_end = state.charge.empty() ? state.params.initial_charge : state.charge.back();
  report.boundary_error = b_end - state.params.initial_charge;
  report.boundary_ok = std::abs(report.boundary_error) <= tol;
  return report;
}

inline double sum(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

}  // namespace nanses

#endif  // NANSES_CORE_HPP_
