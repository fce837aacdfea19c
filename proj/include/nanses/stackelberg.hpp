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

#ifndef NANSES_STACKELBERG_HPP_
#define NANSES_STACKELBERG_HPP_

// Two-step best-response iteration between the SES provider and the
// retailer. Each round: the provider maximizes revenue against the retailer's
// last response (user SES totals and load signs held fixed), then the
// retailer recomputes allocations against the new strategy. Terminates on the
// relative 2-norm change of the strategy vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/leader.hpp"
#include "nanses/mechanism.hpp"
#include "nanses/pricing.hpp"
#include "nanses/retailer.hpp"
#include "nanses/rng.hpp"
#include "nanses/scenario.hpp"

namespace nanses {

struct IterateConfig {
  double tau = 1e-4;            // relative strategy-change tolerance
  std::size_t max_rounds = 500;
  double kkt_tol = 1e-8;
  double p_min = 0.1;           // cents/kWh floor keeping prices positive
  double relaxation = 1.0;      // optional damping in (0, 1]
  double storage_tol = 1e-6;
};

struct EquilibriumResult {
  LeaderStrategy rho;
  FollowerResponse follower;             // allocations at rho
  SesState storage;                      // repaired trajectory of the final solve
  LeaderProblem final_problem;           // the QP the converged strategy solves
  std::vector<double> exogenous_load;
  std::vector<double> total_load;        // E(t) = e_s + E_N + E_P
  std::vector<double> grid_prices;       // p_g(t)
  std::vector<std::vector<double>> payments;  // [t][user], uniform-price rule
  RetailerPayoff payoff;
  std::vector<double> convergence;       // relative change per round
  std::size_t rounds = 0;
};

// The feasible starting strategy of the iteration: p_s(t) = M(t) with zero
// grid exchange, which satisfies the payoff condition with equality and puts
// the aggregate optimum at zero (inside every feasibility interval).
inline LeaderStrategy initial_strategy(const TariffParams& tariff,
                                       const std::vector<double>& exogenous_load) {
  LeaderStrategy rho;
  const std::size_t steps = exogenous_load.size();
  rho.ses_price.resize(steps);
  rho.grid_exchange.assign(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    rho.ses_price[t] = payoff_condition_bound(0.0, exogenous_load[t], tariff, t);
  }
  return rho;
}

namespace detail {

inline double relative_change(const LeaderStrategy& now, const LeaderStrategy& prev) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t t = 0; t < now.steps(); ++t) {
    const double dp = now.ses_price[t] - prev.ses_price[t];
    const double de = now.grid_exchange[t] - prev.grid_exchange[t];
    diff += dp * dp + de * de;
    norm += now.ses_price[t] * now.ses_price[t] + now.grid_exchange[t] * now.grid_exchange[t];
  }
  return norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
}

// True when the strategy violates the payoff condition on the side implied by
// the realized total user load at some step.
inline bool payoff_case_violated(const LeaderStrategy& rho, const FollowerResponse& resp,
                                 const TariffParams& tariff,
                                 const std::vector<double>& exogenous_load, double tol) {
  for (std::size_t t = 0; t < rho.steps(); ++t) {
    const double user_load = resp.aggregate[t] + exogenous_load[t];
    const double bound =
        payoff_condition_bound(rho.grid_exchange[t], exogenous_load[t], tariff, t);
    if (user_load >= 0.0 && rho.ses_price[t] < bound - tol) return true;
    if (user_load < 0.0 && rho.ses_price[t] > bound + tol) return true;
  }
  return false;
}

}  // namespace detail

// Runs the best-response iteration to the equilibrium. A round is one leader
// solve plus one follower response; the initial feasible strategy (or the
// caller-provided warm start) is not counted as a round. Reports default to
// the truthful surpluses; declared_override substitutes arbitrary reports
// (used by the non-certifying full-game audit).
inline EquilibriumResult iterate(const Scenario& scenario, const IterateConfig& config = {},
                                 const LeaderStrategy* start = nullptr,
                                 const std::vector<std::vector<double>>* declared_override =
                                     nullptr) {
  scenario.validate();
  NANSES_CHECK(config.tau > 0.0, ErrorCategory::kUsage, "tau must be positive");
  NANSES_CHECK(config.relaxation > 0.0 && config.relaxation <= 1.0, ErrorCategory::kUsage,
               "relaxation must lie in (0, 1]");

  const std::vector<double> e_n = scenario.exogenous_load();
  const std::vector<std::vector<double>> declared =
      declared_override ? *declared_override : scenario.truthful_reports_by_step();

  LeaderStrategy rho = start ? *start : initial_strategy(scenario.tariff, e_n);
  FollowerResponse resp = compute_follower_response(rho, scenario.tariff, e_n, declared);

  LeaderSolverConfig solver_config{config.kkt_tol, 200000, config.storage_tol};
  EquilibriumResult result;
  result.exogenous_load = e_n;
  std::vector<double> warm_x, warm_y;
  bool converged = false;

  for (std::size_t round = 1; round <= config.max_rounds; ++round) {
    LeaderProblem problem = build_problem(declared, scenario.tariff, e_n, resp, scenario.ses,
                                          config.p_min, /*enforce_boundary=*/true);
    LeaderSolution sol = solve_leader(problem, solver_config,
                                      warm_x.empty() ? nullptr : &warm_x,
                                      warm_y.empty() ? nullptr : &warm_y);
    LeaderStrategy next = sol.strategy;
    if (config.relaxation < 1.0) {
      for (std::size_t t = 0; t < next.steps(); ++t) {
        next.ses_price[t] =
            rho.ses_price[t] + config.relaxation * (next.ses_price[t] - rho.ses_price[t]);
        next.grid_exchange[t] = rho.grid_exchange[t] +
                                config.relaxation * (next.grid_exchange[t] -
                                                     rho.grid_exchange[t]);
      }
    }
    FollowerResponse next_resp =
        compute_follower_response(next, scenario.tariff, e_n, declared);

    // The payoff-condition side was frozen from the previous response; if the
    // realized load signs disagree and the strategy sits on the wrong side,
    // re-solve once against the realized signs before giving up. Storage
    // totals stay frozen at this round's inputs.
    if (detail::payoff_case_violated(next, next_resp, scenario.tariff, e_n, 1e-9)) {
      FollowerResponse hybrid = resp;
      hybrid.aggregate = next_resp.aggregate;
      problem = build_problem(declared, scenario.tariff, e_n, hybrid, scenario.ses,
                              config.p_min, true);
      sol = solve_leader(problem, solver_config);
      next = sol.strategy;
      next_resp = compute_follower_response(next, scenario.tariff, e_n, declared);
      NANSES_CHECK(
          !detail::payoff_case_violated(next, next_resp, scenario.tariff, e_n, 1e-9),
          ErrorCategory::kNonConvergence,
          "payoff-condition case oscillates at round " + std::to_string(round));
    }

    const double rel = detail::relative_change(next, rho);
    result.convergence.push_back(rel);
    rho = std::move(next);
    resp = std::move(next_resp);
    result.storage = sol.repaired.state;
    result.final_problem = std::move(problem);
    result.rounds = round;
    warm_x = std::move(sol.qp_x);
    warm_y = std::move(sol.qp_y);
    if (rel <= config.tau) {
      converged = true;
      // Under damping the working strategy trails the QP optimum; report the
      // exact solution of the final problem so the certificate is tight.
      if (config.relaxation < 1.0) {
        rho = sol.strategy;
        resp = compute_follower_response(rho, scenario.tariff, e_n, declared);
      }
      break;
    }
  }
  if (!converged) {
    std::string history;
    for (std::size_t i = result.convergence.size() > 5 ? result.convergence.size() - 5 : 0;
         i < result.convergence.size(); ++i) {
      history += " " + format_sci(result.convergence[i]);
    }
    throw Error(ErrorCategory::kNonConvergence,
                "best-response iteration did not reach tau=" + format_sci(config.tau) +
                    " within " + std::to_string(config.max_rounds) + " rounds; last changes:" +
                    history);
  }

  result.rho = rho;
  result.follower = std::move(resp);
  const std::size_t steps = scenario.grid.steps;
  result.total_load.resize(steps);
  result.grid_prices.resize(steps);
  result.payments.resize(steps);
  std::vector<double> user_load(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    result.total_load[t] =
        rho.grid_exchange[t] + e_n[t] + result.follower.aggregate[t];
    result.grid_prices[t] = grid_price(result.total_load[t], t, scenario.tariff);
    user_load[t] = result.follower.aggregate[t] + e_n[t];
    const Allocation& alloc = result.follower.allocations[t];
    result.payments[t].resize(alloc.grid_trades.size());
    for (std::size_t n = 0; n < alloc.grid_trades.size(); ++n) {
      result.payments[t][n] = simplified_payment(alloc.grid_trades[n], rho.ses_price[t]);
    }
  }
  result.payoff = retailer_payoff(rho.ses_price, result.grid_prices, user_load);

  const LoadReport load_report = validate_total_load(result.total_load, scenario.tariff);
  if (!load_report.ok()) {
    std::string msg = "equilibrium total load leaves (0, E_max):";
    for (const auto& v : load_report.violations) {
      msg += " E(" + std::to_string(v.step) + ")=" + format_sci(v.load);
    }
    throw Error(ErrorCategory::kValidation, msg);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Equilibrium certificate: sampled deviations on both sides of the game.

struct CertificateReport {
  double follower_worst_margin = 0.0;  // max social-cost improvement found
  double leader_worst_margin = 0.0;    // max revenue improvement found
  std::size_t follower_samples = 0;
  std::size_t leader_samples = 0;
  std::size_t follower_worst_step = 0;
  double tolerance = 1e-9;
  bool follower_pass = true;
  bool leader_pass = true;

  bool pass() const { return follower_pass && leader_pass; }
};

// Checks the equilibrium pair: no feasible aggregate deviation at any step
// may lower the social cost, and no feasible strategy deviation may raise the
// leader's substituted revenue objective, beyond the stated tolerance.
inline CertificateReport certify(const EquilibriumResult& result, const Scenario& scenario,
                                 std::size_t samples_per_step = 200,
                                 std::size_t leader_samples = 10000,
                                 double tolerance = 1e-9) {
  CertificateReport report;
  report.tolerance = tolerance;
  Rng rng(scenario.seed ^ 0x5eed5eedULL);

  const std::vector<std::vector<double>> declared = scenario.truthful_reports_by_step();
  const std::vector<double>& e_n = result.exogenous_load;

  // Follower side: the realized aggregate must minimize the social cost over
  // its feasible interval at every step.
  for (std::size_t t = 0; t < scenario.grid.steps; ++t) {
    const Interval box = feasible_aggregate_interval(declared[t]);
    const double declared_total = sum(declared[t]);
    const LeaderStrategyPoint point = result.rho.at(t);
    const double at_opt = social_cost_quadratic(result.follower.aggregate[t], point,
                                                scenario.tariff, e_n[t], t, declared_total);
    for (std::size_t s = 0; s < samples_per_step; ++s) {
      const double candidate = box.lo == box.hi ? box.lo : rng.uniform(box.lo, box.hi);
      const double cost = social_cost_quadratic(candidate, point, scenario.tariff, e_n[t], t,
                                                declared_total);
      const double margin = at_opt - cost;  // positive = deviation improves
      ++report.follower_samples;
      if (margin > report.follower_worst_margin) {
        report.follower_worst_margin = margin;
        report.follower_worst_step = t;
      }
    }
  }
  report.follower_pass = report.follower_worst_margin <= tolerance;

  // Leader side. The equilibrium usually sits on many bounds (idle charge
  // variables, binding storage levels), so plain ray sampling from it would
  // be blocked at step zero almost surely. Three ingredients keep the
  // deviations feasible and well spread:
  //   - exact 1-D resampling of each price inside its per-step interval,
  //   - folding of nonnegativity-bound coordinates into the interior,
  //   - projecting directions onto the tangent space of the equality rows
  //     and of any other active non-coordinate rows.
  const LeaderProblem& prob = result.final_problem;
  const qp::Problem& qp = prob.qp;
  const std::size_t n = qp.num_vars();
  const std::size_t steps = prob.steps;
  const std::vector<double> z = prob.to_split(result.rho);
  const double base_objective = prob.objective(result.rho);
  const std::vector<double> az = qp.A.multiply(z);

  std::vector<std::vector<double>> basis;
  auto add_to_basis = [&](std::vector<double> row) {
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += row[j] * b[j];
      for (std::size_t j = 0; j < n; ++j) row[j] -= dot * b[j];
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    if (norm > 1e-20) {
      norm = std::sqrt(norm);
      for (double& v : row) v /= norm;
      basis.push_back(std::move(row));
    }
  };
  for (std::size_t i = 0; i < qp.num_constraints(); ++i) {
    const bool equality = qp.l[i] == qp.u[i];
    const int family = static_cast<int>(i / steps);
    const bool coordinate_row = family == LeaderProblem::kPriceFloorRow ||
                                family == LeaderProblem::kChargeVarRow ||
                                family == LeaderProblem::kDischargeVarRow;
    const bool active = (std::isfinite(qp.l[i]) && az[i] - qp.l[i] < 1e-9) ||
                        (std::isfinite(qp.u[i]) && qp.u[i] - az[i] < 1e-9);
    if (equality || (active && !coordinate_row)) {
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = qp.A(i, j);
      add_to_basis(std::move(row));
    }
  }

  auto check_candidate = [&](const LeaderStrategy& cand) {
    if (!prob.feasible(cand, 1e-12)) return;
    ++report.leader_samples;
    const double margin = prob.objective(cand) - base_objective;
    report.leader_worst_margin = std::max(report.leader_worst_margin, margin);
  };

  std::vector<double> dir(n);
  for (std::size_t s = 0; s < leader_samples; ++s) {
    if (s % 3 == 0) {
      // Exact per-step price interval given the current exchanges.
      const std::size_t t = rng.uniform_index(steps);
      double lo = prob.p_min, hi = lo + 1e6;
      for (std::size_t fam : {std::size_t(LeaderProblem::kAggregateRow),
                              std::size_t(LeaderProblem::kPayoffRow)}) {
        const std::size_t row = fam * steps + t;
        const double coeff = qp.A(row, t);
        if (coeff == 0.0) continue;
        const double rest = az[row] - coeff * z[t];
        if (std::isfinite(qp.l[row])) lo = std::max(lo, (qp.l[row] - rest) / coeff);
        if (std::isfinite(qp.u[row])) hi = std::min(hi, (qp.u[row] - rest) / coeff);
      }
      if (hi <= lo) continue;
      LeaderStrategy cand = result.rho;
      cand.ses_price[t] = rng.uniform(lo, hi);
      check_candidate(cand);
      continue;
    }
    for (double& d : dir) d = rng.normal();
    // Fold direction components that would immediately leave a variable
    // bound, then project onto the active tangent space.
    for (std::size_t t = 0; t < steps; ++t) {
      if (z[t] - prob.p_min < 1e-9) dir[t] = std::abs(dir[t]);
      if (z[steps + t] < 1e-9) dir[steps + t] = std::abs(dir[steps + t]);
      if (z[2 * steps + t] < 1e-9) dir[2 * steps + t] = std::abs(dir[2 * steps + t]);
    }
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dir[j] * b[j];
      for (std::size_t j = 0; j < n; ++j) dir[j] -= dot * b[j];
    }
    const std::vector<double> adir = qp.A.multiply(dir);
    double step = 1.0;
    for (std::size_t i = 0; i < az.size(); ++i) {
      if (qp.l[i] == qp.u[i]) continue;
      if (adir[i] > 1e-14 && std::isfinite(qp.u[i])) {
        step = std::min(step, (qp.u[i] - az[i]) / adir[i]);
      } else if (adir[i] < -1e-14 && std::isfinite(qp.l[i])) {
        step = std::min(step, (qp.l[i] - az[i]) / adir[i]);
      }
    }
    if (step <= 0.0) continue;
    const double scale = step * rng.uniform();
    LeaderStrategy cand;
    cand.ses_price.resize(steps);
    cand.grid_exchange.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      cand.ses_price[t] = z[t] + scale * dir[t];
      cand.grid_exchange[t] = (z[steps + t] + scale * dir[steps + t]) -
                              (z[2 * steps + t] + scale * dir[2 * steps + t]);
    }
    check_candidate(cand);
  }
  report.leader_pass = report.leader_worst_margin <= tolerance;
  return report;
}

}  // namespace nanses

#endif  // NANSES_STACKELBERG_HPP_
