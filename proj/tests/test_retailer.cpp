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

#include "nanses/retailer.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "nanses/rng.hpp"

using namespace nanses;

namespace {

TariffParams flat_tariff(double phi, double delta, double e_max = 1e5) {
  TariffParams t;
  t.phi.assign(1, phi);
  t.delta.assign(1, delta);
  t.e_max = e_max;
  return t;
}

}  // namespace

TEST_CASE("optimal aggregate closed form") {
  const TariffParams t = flat_tariff(0.02, 10.0);
  CHECK(optimal_aggregate({12.0, 5.0}, t, 20.0, 0) == doctest::Approx(37.5));
  CHECK(optimal_aggregate({10.0, 0.0}, t, 0.0, 0) == doctest::Approx(0.0));
}

TEST_CASE("optimal aggregate minimizes the quadratic social cost (grid search)") {
  const TariffParams t = flat_tariff(0.01, 10.0);
  const LeaderStrategyPoint rho{20.0, 0.0};
  const double e_n = 100.0;
  const double star = optimal_aggregate(rho, t, e_n, 0);
  CHECK(star == doctest::Approx(450.0));

  // Independent check: sample the quadratic form on a dense grid.
  double best = 1e300, best_at = 0.0;
  const int cells = 100000;
  for (int i = 0; i <= cells; ++i) {
    const double e_p = -500.0 + 1500.0 * static_cast<double>(i) / cells;
    const double c = social_cost_quadratic(e_p, rho, t, e_n, 0, 0.0);
    if (c < best) {
      best = c;
      best_at = e_p;
    }
  }
  CHECK(std::abs(best_at - star) <= 1500.0 / cells + 1e-9);
}

TEST_CASE("stationarity of the aggregate optimum across scales") {
  const TariffParams t = flat_tariff(0.034, 7.0);
  const LeaderStrategyPoint rho{15.0, -3.0};
  const double e_n = 42.0;
  const double star = optimal_aggregate(rho, t, e_n, 0);
  const double at_star = social_cost_quadratic(star, rho, t, e_n, 0, 5.0);
  // Below ~1e-3 the quadratic increment falls under double resolution at this
  // cost magnitude, so the six decades start there.
  for (double eps = 1e-3; eps <= 1e2 + 1.0; eps *= 10.0) {
    CHECK(social_cost_quadratic(star + eps, rho, t, e_n, 0, 5.0) > at_star);
    CHECK(social_cost_quadratic(star - eps, rho, t, e_n, 0, 5.0) > at_star);
  }
}

TEST_CASE("allocation corner cases from the proportional rule") {
  SUBCASE("all-surplus full sell-to-grid corner") {
    const Allocation a = allocate(-3.0, {2.0, 1.0});
    CHECK(a.grid_trades[0] == doctest::Approx(-2.0));
    CHECK(a.grid_trades[1] == doctest::Approx(-1.0));
    CHECK(a.ses_trades[0] == doctest::Approx(0.0));
    CHECK(a.ses_trades[1] == doctest::Approx(0.0));
    CHECK(a.aggregate == doctest::Approx(-3.0));
  }
  SUBCASE("mixed types trade nothing with the grid") {
    const Allocation a = allocate(0.0, {2.0, -1.0});
    CHECK(a.grid_trades[0] == 0.0);
    CHECK(a.grid_trades[1] == 0.0);
    CHECK(a.ses_trades[0] == doctest::Approx(2.0));
    CHECK(a.ses_trades[1] == doctest::Approx(-1.0));
  }
  SUBCASE("all-deficit proportional split respects per-user bounds") {
    const Allocation a = allocate(1.5, {-1.0, -2.0});
    CHECK(a.grid_trades[0] == doctest::Approx(0.5));
    CHECK(a.grid_trades[1] == doctest::Approx(1.0));
    for (std::size_t n = 0; n < 2; ++n) {
      const Interval b = user_grid_bounds(n == 0 ? -1.0 : -2.0);
      CHECK(b.contains(a.grid_trades[n]));
    }
  }
  SUBCASE("zero declarations are excluded and get zero trades") {
    const Allocation a = allocate(-1.0, {2.0, 0.0});
    CHECK(a.grid_trades[0] == doctest::Approx(-1.0));
    CHECK(a.grid_trades[1] == 0.0);
    CHECK(a.ses_trades[1] == 0.0);
  }
  SUBCASE("infeasible aggregate is rejected") {
    CHECK_THROWS_AS((void)allocate(1.0, {0.0, 0.0}), Error);
    CHECK_THROWS_AS((void)allocate(-4.0, {2.0, 1.0}), Error);
    CHECK_THROWS_AS((void)allocate(0.5, {2.0, 1.0}), Error);
  }
}

TEST_CASE("allocation bounds hold on randomized feasible instances") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t users = 1 + rng.uniform_index(8);
    std::vector<double> declared(users);
    const bool surplus_side = rng.uniform() < 0.5;
    for (double& s : declared) {
      s = rng.uniform(0.0, 5.0) * (surplus_side ? 1.0 : -1.0);
      if (rng.uniform() < 0.15) s = 0.0;
    }
    const Interval box = feasible_aggregate_interval(declared);
    const double aggregate = rng.uniform(box.lo, box.hi);
    const Allocation a = allocate(aggregate, declared);
    double total = 0.0;
    for (std::size_t n = 0; n < users; ++n) {
      CHECK(user_grid_bounds(declared[n]).contains(a.grid_trades[n], 1e-12));
      CHECK(a.ses_trades[n] ==
            doctest::Approx(ses_trade_from_grid_trade(a.grid_trades[n], declared[n])));
      total += a.grid_trades[n];
    }
    CHECK(total == doctest::Approx(aggregate).epsilon(1e-12));
  }
}

TEST_CASE("proportional rule is homogeneous of degree one") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> declared{rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0),
                                 rng.uniform(0.5, 4.0)};
    const double aggregate = -rng.uniform(0.0, declared[0] + declared[1] + declared[2]);
    const double c = rng.uniform(0.1, 10.0);
    const Allocation base = allocate(aggregate, declared);
    std::vector<double> scaled = declared;
    for (double& s : scaled) s *= c;
    const Allocation big = allocate(c * aggregate, scaled);
    for (std::size_t n = 0; n < declared.size(); ++n) {
      CHECK(big.grid_trades[n] == doctest::Approx(c * base.grid_trades[n]));
    }
  }
}

TEST_CASE("social cost direct form") {
  const TariffParams t = flat_tariff(0.01, 10.0);
  Allocation a;
  a.grid_trades = {-1.0};
  a.ses_trades = {1.0};
  a.aggregate = -1.0;
  CHECK(social_cost(a, {10.0, 0.0}, t, 20.0, 0) == doctest::Approx(-20.19));

  Allocation idle;
  idle.grid_trades = {0.0, 0.0};
  idle.ses_trades = {0.0, 0.0};
  idle.aggregate = 0.0;
  CHECK(social_cost(idle, {10.0, 0.0}, t, 20.0, 0) == doctest::Approx(0.0));
}

TEST_CASE("direct and quadratic social cost forms agree on allocations") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const TariffParams t = flat_tariff(rng.uniform(0.005, 0.1), rng.uniform(0.0, 20.0));
    const LeaderStrategyPoint rho{rng.uniform(0.1, 40.0), rng.uniform(-10.0, 10.0)};
    const double e_n = rng.uniform(-5.0, 50.0);
    const bool surplus_side = rng.uniform() < 0.5;
    std::vector<double> declared(2 + rng.uniform_index(5));
    for (double& s : declared) s = rng.uniform(0.1, 5.0) * (surplus_side ? 1.0 : -1.0);
    const Interval box = feasible_aggregate_interval(declared);
    const double aggregate = rng.uniform(box.lo, box.hi);
    const Allocation a = allocate(aggregate, declared);
    const double direct = social_cost(a, rho, t, e_n, 0);
    const double quad = social_cost_quadratic(aggregate, rho, t, e_n, 0, sum(declared));
    CHECK(direct == doctest::Approx(quad).epsilon(1e-10));
  }
}

TEST_CASE("follower step clamps the aggregate into the feasible interval") {
  const TariffParams t = flat_tariff(0.01, 10.0);
  // Unconstrained optimum is 450 with these numbers; two deficit users can
  // absorb at most 3.
  const FollowerStep step = solve_follower_step({20.0, 0.0}, t, 100.0, 0, {-1.0, -2.0});
  CHECK(step.unconstrained_aggregate == doctest::Approx(450.0));
  CHECK(step.clamped);
  CHECK(step.allocation.aggregate == doctest::Approx(3.0));
  CHECK(step.allocation.grid_trades[0] == doctest::Approx(1.0));
  CHECK(step.allocation.grid_trades[1] == doctest::Approx(2.0));

  // Mixed reports force a zero aggregate regardless of the optimum.
  const FollowerStep mixed = solve_follower_step({20.0, 0.0}, t, 100.0, 0, {1.0, -2.0});
  CHECK(mixed.allocation.aggregate == 0.0);
  CHECK(mixed.clamped);
}
