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

#ifndef NANSES_TESTS_SUPPORT_INSTANCES_HPP_
#define NANSES_TESTS_SUPPORT_INSTANCES_HPP_

// Randomized leader-problem instances with a strictly feasible point known by
// construction, used by the solver oracle tests.

#include <cmath>
#include <cstddef>
#include <vector>

#include "nanses/core.hpp"
#include "nanses/leader.hpp"
#include "nanses/pricing.hpp"
#include "nanses/retailer.hpp"
#include "nanses/rng.hpp"

namespace nanses::testsupport {

struct LeaderInstance {
  LeaderProblem problem;
  std::vector<std::vector<double>> declared_by_step;
  TariffParams tariff;
  std::vector<double> exogenous_load;
  SesParams ses;
  // Strictly feasible split-space point (interior for inequalities, exact on
  // the boundary equality when enforced).
  std::vector<double> interior_split;
  LeaderStrategy interior_strategy;
};

// Builds an H-step instance. Each step is either all-deficit (aggregate
// optimum held positive) or all-surplus (held negative, with the exogenous
// load made negative enough to flip the payoff-condition case consistently).
inline LeaderInstance random_leader_instance(Rng& rng, std::size_t steps,
                                             bool enforce_boundary, double p_min = 0.1) {
  LeaderInstance inst;
  inst.ses.capacity = rng.uniform(12.0, 25.0);
  inst.ses.initial_charge = rng.uniform(0.3, 0.7) * inst.ses.capacity;
  inst.ses.leakage = rng.uniform(0.95, 1.0);
  inst.ses.charge_eff = rng.uniform(0.85, 1.0);
  inst.ses.discharge_eff = rng.uniform(1.0, 1.15);

  inst.tariff.phi.resize(steps);
  inst.tariff.delta.resize(steps);
  inst.tariff.e_max = 1e6;
  inst.exogenous_load.resize(steps);
  inst.declared_by_step.resize(steps);

  FollowerResponse seed_response;
  seed_response.aggregate.resize(steps);
  seed_response.charge_totals.resize(steps);
  seed_response.discharge_totals.resize(steps);
  seed_response.ses_totals.resize(steps);

  std::vector<double> seed_eps(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    inst.tariff.phi[t] = rng.uniform(0.05, 0.2);
    inst.tariff.delta[t] = rng.uniform(2.0, 12.0);
    seed_response.charge_totals[t] = rng.uniform(0.0, 3.0);
    seed_response.discharge_totals[t] = rng.uniform(0.0, 2.0);
    seed_response.ses_totals[t] =
        seed_response.charge_totals[t] - seed_response.discharge_totals[t];

    const bool deficit_step = rng.uniform() < 0.6;
    double eps;  // seed aggregate, strict interior of the feasibility box
    if (deficit_step) {
      inst.exogenous_load[t] = rng.uniform(5.0, 40.0);
      eps = rng.uniform(0.5, 6.0);
      const double total = eps + rng.uniform(2.0, 10.0);
      const std::size_t users = 2 + rng.uniform_index(3);
      auto& declared = inst.declared_by_step[t];
      declared.assign(users, 0.0);
      double remaining = total;
      for (std::size_t u = 0; u + 1 < users; ++u) {
        const double part = remaining * rng.uniform(0.2, 0.6);
        declared[u] = -part;
        remaining -= part;
      }
      declared[users - 1] = -remaining;
    } else {
      inst.exogenous_load[t] = rng.uniform(1.0, 5.0);
      eps = -(inst.exogenous_load[t] + rng.uniform(1.0, 10.0));
      const double total = -eps + rng.uniform(2.0, 10.0);
      const std::size_t users = 2 + rng.uniform_index(3);
      auto& declared = inst.declared_by_step[t];
      declared.assign(users, 0.0);
      double remaining = total;
      for (std::size_t u = 0; u + 1 < users; ++u) {
        const double part = remaining * rng.uniform(0.2, 0.6);
        declared[u] = part;
        remaining -= part;
      }
      declared[users - 1] = remaining;
    }
    seed_eps[t] = eps;
    seed_response.aggregate[t] = eps;
  }

  // Interior point: hold the charge level at b(0) every step, with a small
  // simultaneous component so the split variables sit strictly inside their
  // nonnegativity bounds.
  inst.interior_split.assign(3 * steps, 0.0);
  inst.interior_strategy.ses_price.resize(steps);
  inst.interior_strategy.grid_exchange.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double hold = inst.ses.initial_charge * (1.0 - inst.ses.leakage) -
                        inst.ses.charge_eff * seed_response.charge_totals[t] +
                        inst.ses.discharge_eff * seed_response.discharge_totals[t];
    const double tiny = 1e-3;
    double eplus, eminus;
    if (hold >= 0.0) {
      eminus = tiny;
      eplus = (hold + inst.ses.discharge_eff * eminus) / inst.ses.charge_eff;
    } else {
      eplus = tiny;
      eminus = (inst.ses.charge_eff * eplus - hold) / inst.ses.discharge_eff;
    }
    const double e_net = eplus - eminus;
    const double price = inst.tariff.delta[t] +
                         inst.tariff.phi[t] * (inst.exogenous_load[t] + e_net +
                                               2.0 * seed_eps[t]);
    inst.interior_split[t] = price;
    inst.interior_split[steps + t] = eplus;
    inst.interior_split[2 * steps + t] = eminus;
    inst.interior_strategy.ses_price[t] = price;
    inst.interior_strategy.grid_exchange[t] = e_net;
  }

  inst.problem = build_problem(inst.declared_by_step, inst.tariff, inst.exogenous_load,
                               seed_response, inst.ses, p_min, enforce_boundary);
  return inst;
}

// One-step mechanism instance where the aggregate optimum is interior for
// the full report set and for every leave-one-out subset, which is the
// regime where the pivot payment provably collapses to p_s * e_n.
struct MechanismInstance {
  std::vector<double> declared;
  LeaderStrategyPoint rho;
  TariffParams tariff;   // single step
  double exogenous_load = 0.0;
  double aggregate = 0.0;  // interior optimum implied by rho
};

inline MechanismInstance random_mechanism_instance(Rng& rng, std::size_t users) {
  MechanismInstance inst;
  const bool surplus_side = rng.uniform() < 0.5;
  inst.declared.resize(users);
  double total = 0.0, largest = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < users; ++i) {
    double mag = rng.uniform(0.2, 5.0);
    if (users > 1 && rng.uniform() < 0.1) mag = 0.0;  // occasional zero report
    inst.declared[i] = surplus_side ? mag : -mag;
    total += inst.declared[i];
    largest = std::max(largest, mag);
    if (mag != 0.0) ++nonzero;
  }
  if (nonzero == 0) {
    inst.declared[0] = surplus_side ? 1.0 : -1.0;
    total += inst.declared[0];
    largest = 1.0;
    nonzero = 1;
  }
  // Interior also after removing the largest reporter.
  const double slack = std::abs(total) - largest;
  double aggregate = 0.0;
  if (nonzero > 1 && slack > 1e-9) {
    aggregate = rng.uniform(0.05, 0.95) * slack;
    if (surplus_side) aggregate = -aggregate;
  }
  inst.aggregate = aggregate;

  inst.tariff.phi = {rng.uniform(0.005, 0.1)};
  inst.tariff.delta = {rng.uniform(1.0, 15.0)};
  inst.tariff.e_max = 1e6;
  inst.exogenous_load = rng.uniform(-10.0, 60.0);
  inst.rho.grid_exchange = rng.uniform(-20.0, 20.0);
  inst.rho.ses_price =
      inst.tariff.delta[0] +
      inst.tariff.phi[0] * (inst.exogenous_load + inst.rho.grid_exchange + 2.0 * aggregate);
  return inst;
}

// True when the seed interior point is strictly feasible (construction can
// fail when the sampled price dips under the floor; callers resample).
inline bool instance_interior_ok(const LeaderInstance& inst, double margin = 1e-6) {
  const auto az = inst.problem.qp.A.multiply(inst.interior_split);
  for (std::size_t i = 0; i < az.size(); ++i) {
    const double lo = inst.problem.qp.l[i];
    const double hi = inst.problem.qp.u[i];
    if (lo == hi) {
      if (std::abs(az[i] - lo) > 1e-9) return false;
    } else {
      if (std::isfinite(lo) && az[i] < lo + margin) return false;
      if (std::isfinite(hi) && az[i] > hi - margin) return false;
    }
  }
  return true;
}

}  // namespace nanses::testsupport

#endif  // NANSES_TESTS_SUPPORT_INSTANCES_HPP_
