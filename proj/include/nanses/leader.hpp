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

#ifndef NANSES_LEADER_HPP_
#define NANSES_LEADER_HPP_

// The SES provider's revenue maximization. Substituting the retailer's
// closed-form response into the revenue turns it into a separable concave
// quadratic in (p_s(t), e_s(t)); the cross terms cancel. The constraint set
// couples steps only through the storage trajectory, which is kept linear by
// the usual nonnegative charge/discharge split; complementarity is restored
// by netting afterwards and re-validating the trajectory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/pricing.hpp"
#include "nanses/qp.hpp"
#include "nanses/retailer.hpp"

namespace nanses {

// Revenue over the horizon: income from user SES trades plus the grid
// exchange settled at the realized grid price.
inline double revenue(const LeaderStrategy& rho, const std::vector<double>& user_ses_totals,
                      const std::vector<double>& grid_prices) {
  double total = 0.0;
  for (std::size_t t = 0; t < rho.steps(); ++t) {
    total += -rho.ses_price[t] * user_ses_totals[t] - grid_prices[t] * rho.grid_exchange[t];
  }
  return total;
}

// Assembled leader problem for one best-response round. Variable layout of
// the underlying QP: z = [p_s(0..H-1), e+(0..H-1), e-(0..H-1)].
struct LeaderProblem {
  std::size_t steps = 0;
  // Objective coefficients of the maximization, per step.
  std::vector<double> lambda, mu, nu, xi;
  // Frozen data for this round.
  std::vector<Interval> aggregate_box;       // feasible E_P interval per step
  std::vector<bool> total_load_nonneg;       // payoff-condition case per step
  std::vector<double> user_charge_totals;    // sum_n x_n+ per step, held fixed
  std::vector<double> user_discharge_totals; // sum_n x_n- per step, held fixed
  std::vector<double> exogenous_load;
  TariffParams tariff;
  SesParams ses;
  double p_min = 0.1;
  bool enforce_boundary = true;

  qp::Problem qp;

  // Row layout inside qp (one block of `steps` rows each).
  enum RowFamily { kAggregateRow = 0, kPayoffRow, kPriceFloorRow, kChargeVarRow,
                   kDischargeVarRow, kStorageRow };

  static constexpr const char* row_family_name(int family) {
    switch (family) {
      case kAggregateRow: return "aggregate-feasibility";
      case kPayoffRow: return "retailer-payoff-condition";
      case kPriceFloorRow: return "price-floor";
      case kChargeVarRow: return "charge-nonnegativity";
      case kDischargeVarRow: return "discharge-nonnegativity";
      case kStorageRow: return "storage";
    }
    return "unknown";
  }

  std::string describe_row(std::size_t row) const {
    const int family = static_cast<int>(row / steps);
    const std::size_t t = row % steps;
    return std::string(row_family_name(family)) + " at step " + std::to_string(t);
  }

  // Maximization objective at a net strategy.
  double objective(const LeaderStrategy& rho) const {
    double v = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double p = rho.ses_price[t];
      const double e = rho.grid_exchange[t];
      v += lambda[t] * p * p + mu[t] * p + nu[t] * e * e + xi[t] * e;
    }
    return v;
  }

  // Split-variable embedding of a net strategy.
  std::vector<double> to_split(const LeaderStrategy& rho) const {
    std::vector<double> z(3 * steps, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      z[t] = rho.ses_price[t];
      const FlowSplit f = FlowSplit::from_net(rho.grid_exchange[t]);
      z[steps + t] = f.charge;
      z[2 * steps + t] = f.discharge;
    }
    return z;
  }

  // Feasibility of a net strategy against all assembled rows.
  bool feasible(const LeaderStrategy& rho, double tol = 1e-9) const {
    const std::vector<double> az = qp.A.multiply(to_split(rho));
    for (std::size_t i = 0; i < az.size(); ++i) {
      if (az[i] < qp.l[i] - tol || az[i] > qp.u[i] + tol) return false;
    }
    return true;
  }
};

// Builds the per-round QP. The follower response supplies the aggregate grid
// loads (for the payoff-condition case split) and the user SES totals (held
// fixed inside the storage constraints).
inline LeaderProblem build_problem(const std::vector<std::vector<double>>& declared_by_step,
                                   const TariffParams& tariff,
                                   const std::vector<double>& exogenous_load,
                                   const FollowerResponse& follower, const SesParams& ses,
                                   double p_min, bool enforce_boundary = true) {
  const std::size_t steps = declared_by_step.size();
  NANSES_CHECK(steps > 0, ErrorCategory::kUsage, "leader problem needs at least one step");

  LeaderProblem prob;
  prob.steps = steps;
  prob.tariff = tariff;
  prob.ses = ses;
  prob.p_min = p_min;
  prob.enforce_boundary = enforce_boundary;
  prob.exogenous_load = exogenous_load;
  prob.user_charge_totals = follower.charge_totals;
  prob.user_discharge_totals = follower.discharge_totals;
  prob.lambda.resize(steps);
  prob.mu.resize(steps);
  prob.nu.resize(steps);
  prob.xi.resize(steps);
  prob.aggregate_box.resize(steps);
  prob.total_load_nonneg.resize(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    const double phi = tariff.phi[t];
    const double delta = tariff.delta[t];
    const double e_n = exogenous_load[t];
    const double declared_total = sum(declared_by_step[t]);
    prob.lambda[t] = -0.5 / phi;
    prob.mu[t] = 0.5 * (e_n + delta / phi) - declared_total;
    prob.nu[t] = -0.5 * phi;
    prob.xi[t] = -0.5 * (phi * e_n + delta);
    prob.aggregate_box[t] = feasible_aggregate_interval(declared_by_step[t]);
    prob.total_load_nonneg[t] = follower.aggregate[t] + e_n >= 0.0;
  }

  const std::size_t n = 3 * steps;
  const std::size_t m = 6 * steps;
  prob.qp.P = qp::Matrix(n, n);
  prob.qp.q.assign(n, 0.0);
  prob.qp.A = qp::Matrix(m, n);
  prob.qp.l.assign(m, -qp::kInf);
  prob.qp.u.assign(m, qp::kInf);

  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t ip = t;
    const std::size_t iplus = steps + t;
    const std::size_t iminus = 2 * steps + t;
    // Maximize => minimize the negated objective.
    prob.qp.P(ip, ip) = -2.0 * prob.lambda[t];
    prob.qp.P(iplus, iplus) = -2.0 * prob.nu[t];
    prob.qp.P(iminus, iminus) = -2.0 * prob.nu[t];
    prob.qp.P(iplus, iminus) = 2.0 * prob.nu[t];
    prob.qp.P(iminus, iplus) = 2.0 * prob.nu[t];
    prob.qp.q[ip] = -prob.mu[t];
    prob.qp.q[iplus] = -prob.xi[t];
    prob.qp.q[iminus] = prob.xi[t];

    const double phi = prob.tariff.phi[t];
    const double delta = prob.tariff.delta[t];
    const double e_n = exogenous_load[t];

    // Aggregate feasibility: E_P(p_s, e_s) within its interval, with
    // E_P = p_s/(2 phi) - e_s/2 - (delta/phi + E_N)/2.
    {
      const std::size_t row = LeaderProblem::kAggregateRow * steps + t;
      prob.qp.A(row, ip) = 0.5 / phi;
      prob.qp.A(row, iplus) = -0.5;
      prob.qp.A(row, iminus) = 0.5;
      const double shift = 0.5 * (delta / phi + e_n);
      prob.qp.l[row] = prob.aggregate_box[t].lo + shift;
      prob.qp.u[row] = prob.aggregate_box[t].hi + shift;
    }
    // Payoff condition: p_s - phi e_s >= or <= phi E_N + delta, case frozen
    // from the previous iterate's total load sign.
    {
      const std::size_t row = LeaderProblem::kPayoffRow * steps + t;
      prob.qp.A(row, ip) = 1.0;
      prob.qp.A(row, iplus) = -phi;
      prob.qp.A(row, iminus) = phi;
      const double bound = phi * e_n + delta;
      if (prob.total_load_nonneg[t]) {
        prob.qp.l[row] = bound;
      } else {
        prob.qp.u[row] = bound;
      }
    }
    {
      const std::size_t row = LeaderProblem::kPriceFloorRow * steps + t;
      prob.qp.A(row, ip) = 1.0;
      prob.qp.l[row] = p_min;
    }
    {
      const std::size_t row = LeaderProblem::kChargeVarRow * steps + t;
      prob.qp.A(row, iplus) = 1.0;
      prob.qp.l[row] = 0.0;
    }
    {
      const std::size_t row = LeaderProblem::kDischargeVarRow * steps + t;
      prob.qp.A(row, iminus) = 1.0;
      prob.qp.l[row] = 0.0;
    }
  }

  // Storage rows: charge level at the end of each step within [0, Q_M]; the
  // last one becomes the periodic boundary equality when enforced.
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t row = LeaderProblem::kStorageRow * steps + t;
    double offset = ses.initial_charge;
    for (std::size_t k = 0; k <= t; ++k) {
      offset = ses.leakage * offset + ses.charge_eff * follower.charge_totals[k] -
               ses.discharge_eff * follower.discharge_totals[k];
    }
    double decay = 1.0;
    for (std::size_t k = t + 1; k-- > 0;) {
      prob.qp.A(row, steps + k) = decay * ses.charge_eff;
      prob.qp.A(row, 2 * steps + k) = -decay * ses.discharge_eff;
      decay *= ses.leakage;
    }
    if (enforce_boundary && t == steps - 1) {
      prob.qp.l[row] = prob.qp.u[row] = ses.initial_charge - offset;
    } else {
      prob.qp.l[row] = -offset;
      prob.qp.u[row] = ses.capacity - offset;
    }
  }
  return prob;
}

struct RepairedFlows {
  std::vector<FlowSplit> ses_flows;  // complementary SES<->grid flows
  SesState state;                    // trajectory recomputed after netting
  double max_simultaneous = 0.0;     // largest min(e+, e-) removed
};

// Nets the relaxed split into complementary flows and recomputes the charge
// trajectory with the user totals fixed. The caller validates the result;
// violations mean the relaxed optimum genuinely needed simultaneous
// charge/discharge and the instance is reported rather than accepted.
inline RepairedFlows split_and_repair(const std::vector<double>& charge_part,
                                      const std::vector<double>& discharge_part,
                                      const SesParams& ses,
                                      const std::vector<double>& user_charge_totals,
                                      const std::vector<double>& user_discharge_totals) {
  const std::size_t steps = charge_part.size();
  RepairedFlows out;
  out.ses_flows.resize(steps);
  std::vector<FlowSplit> user_flows(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out.max_simultaneous =
        std::max(out.max_simultaneous, std::min(charge_part[t], discharge_part[t]));
    out.ses_flows[t] = FlowSplit::from_net(charge_part[t] - discharge_part[t]);
    user_flows[t] = FlowSplit{user_charge_totals[t], user_discharge_totals[t]};
  }
  out.state = simulate_trajectory(ses, out.ses_flows, user_flows);
  return out;
}

struct LeaderSolverConfig {
  double kkt_tol = 1e-8;
  std::size_t max_iterations = 200000;
  double storage_tol = 1e-6;  // tolerance for the repaired trajectory
};

struct LeaderSolution {
  LeaderStrategy strategy;      // netted
  RepairedFlows repaired;
  double objective = 0.0;       // maximization value
  qp::KktResiduals kkt;
  std::size_t qp_iterations = 0;
  std::vector<double> qp_x, qp_y;  // split-space solution kept for warm starts
};

// Solves the assembled leader QP, polishes, nets the split, re-validates the
// trajectory and the aggregate-feasibility cases.
inline LeaderSolution solve_leader(const LeaderProblem& prob,
                                   const LeaderSolverConfig& config = {},
                                   const std::vector<double>* warm_x = nullptr,
                                   const std::vector<double>* warm_y = nullptr) {
  qp::Settings settings;
  settings.max_iterations = config.max_iterations;
  settings.eps_abs = std::min(1e-10, config.kkt_tol * 1e-2);
  settings.eps_rel = settings.eps_abs;

  // The polish step usually lands at machine precision; when it cannot
  // (degenerate active set), tighten the splitting tolerance and try again
  // before reporting failure.
  qp::Result res;
  qp::KktResiduals kkt{qp::kInf, qp::kInf, qp::kInf};
  const std::vector<double>* x0 = warm_x;
  const std::vector<double>* y0 = warm_y;
  for (int attempt = 0; attempt < 3; ++attempt) {
    qp::Solver solver(settings);
    res = solver.solve(prob.qp, x0, y0);
    if (res.status == qp::Status::kPrimalInfeasible) {
      throw Error(ErrorCategory::kInfeasible,
                  "leader problem infeasible; certificate concentrates on " +
                      prob.describe_row(res.infeasible_row));
    }
    kkt = qp::kkt_residuals(prob.qp, res.x, res.y);
    if (res.status == qp::Status::kSolved && kkt.max() <= config.kkt_tol) break;
    settings.eps_abs *= 1e-2;
    settings.eps_rel = settings.eps_abs;
    x0 = &res.x;
    y0 = &res.y;
    if (settings.eps_abs < 1e-15) break;
  }
  if (res.status != qp::Status::kSolved || kkt.max() > config.kkt_tol) {
    throw Error(ErrorCategory::kNonConvergence,
                "leader QP stopped after " + std::to_string(res.iterations) +
                    " iterations with KKT residual " + format_sci(kkt.max()));
  }

  LeaderSolution sol;
  sol.kkt = kkt;
  sol.qp_iterations = res.iterations;
  const std::size_t steps = prob.steps;
  sol.strategy.ses_price.assign(res.x.begin(), res.x.begin() + steps);
  std::vector<double> eplus(res.x.begin() + steps, res.x.begin() + 2 * steps);
  std::vector<double> eminus(res.x.begin() + 2 * steps, res.x.end());
  sol.strategy.grid_exchange.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    sol.strategy.grid_exchange[t] = eplus[t] - eminus[t];
  }
  sol.repaired = split_and_repair(eplus, eminus, prob.ses, prob.user_charge_totals,
                                  prob.user_discharge_totals);
  const TrajectoryReport traj = validate_trajectory(sol.repaired.state, config.storage_tol);
  const bool boundary_bad = prob.enforce_boundary && !traj.boundary_ok;
  if (!traj.bound_violations.empty() || boundary_bad) {
    std::string msg = "complementarity repair left an infeasible trajectory:";
    for (const auto& v : traj.bound_violations) {
      msg += " step " + std::to_string(v.step) + " by " + format_sci(v.amount) + " kWh;";
    }
    if (boundary_bad) {
      msg += " boundary mismatch " + format_sci(traj.boundary_error) + " kWh";
    }
    throw Error(ErrorCategory::kInfeasible, msg);
  }

  // Post-check the aggregate-feasibility cases outside the solver.
  for (std::size_t t = 0; t < steps; ++t) {
    const double aggregate =
        optimal_aggregate(sol.strategy.at(t), prob.tariff, prob.exogenous_load[t], t);
    NANSES_CHECK(prob.aggregate_box[t].contains(aggregate, 1e-6), ErrorCategory::kInfeasible,
                 "leader solution leaves the aggregate feasibility case at step " +
                     std::to_string(t));
  }

  sol.objective = prob.objective(sol.strategy);
  sol.qp_x = std::move(res.x);
  sol.qp_y = std::move(res.y);
  return sol;
}

}  // namespace nanses

#endif  // NANSES_LEADER_HPP_
