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

#include "nanses/qp.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "nanses/rng.hpp"
#include "support/reference_qp.hpp"

using namespace nanses;
using qp::kInf;

TEST_CASE("box-constrained diagonal QP clamps at the bounds") {
  qp::Problem p;
  p.P = qp::Matrix(2, 2);
  p.P(0, 0) = 2.0;
  p.P(1, 1) = 2.0;
  p.q = {-2.0, -4.0};
  p.A = qp::Matrix(2, 2);
  p.A(0, 0) = 1.0;
  p.A(1, 1) = 1.0;
  p.l = {0.0, 0.0};
  p.u = {0.5, 0.5};

  qp::Solver solver;
  const qp::Result r = solver.solve(p);
  REQUIRE(r.status == qp::Status::kSolved);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(qp::kkt_residuals(p, r.x, r.y).max() < 1e-8);
}

TEST_CASE("equality row pins the solution") {
  qp::Problem p;
  p.P = qp::Matrix(2, 2);
  p.P(0, 0) = 1.0;
  p.P(1, 1) = 1.0;
  p.q = {0.0, 0.0};
  p.A = qp::Matrix(1, 2);
  p.A(0, 0) = 1.0;
  p.A(0, 1) = 1.0;
  p.l = {1.0};
  p.u = {1.0};

  const qp::Result r = qp::Solver().solve(p);
  REQUIRE(r.status == qp::Status::kSolved);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("semidefinite objective with a flat direction still solves") {
  qp::Problem p;
  p.P = qp::Matrix(2, 2);
  p.P(0, 0) = 2.0;  // x1 curved, x2 flat
  p.q = {-2.0, -1.0};
  p.A = qp::Matrix(2, 2);
  p.A(0, 0) = 1.0;
  p.A(1, 1) = 1.0;
  p.l = {-10.0, 0.0};
  p.u = {10.0, 1.0};

  const qp::Result r = qp::Solver().solve(p);
  REQUIRE(r.status == qp::Status::kSolved);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("detects an infeasible pair of rows") {
  qp::Problem p;
  p.P = qp::Matrix(1, 1);
  p.P(0, 0) = 1.0;
  p.q = {0.0};
  p.A = qp::Matrix(2, 1);
  p.A(0, 0) = 1.0;
  p.A(1, 0) = 1.0;
  p.l = {2.0, -kInf};
  p.u = {kInf, 1.0};  // x >= 2 and x <= 1

  const qp::Result r = qp::Solver().solve(p);
  CHECK(r.status == qp::Status::kPrimalInfeasible);
}

TEST_CASE("random strictly convex QPs match the barrier reference solver") {
  Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(6);
    const std::size_t extra_rows = 1 + rng.uniform_index(5);

    qp::Problem p;
    p.P = qp::Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double v = rng.uniform(-1.0, 1.0);
        p.P(i, j) += v * 0.3;
        p.P(j, i) = p.P(i, j);
      }
      p.P(i, i) += 2.0;  // diagonally dominant, safely PD
    }
    p.q.resize(n);
    for (double& v : p.q) v = rng.uniform(-5.0, 5.0);

    // Interior point by construction.
    std::vector<double> x0(n);
    for (double& v : x0) v = rng.uniform(-1.0, 1.0);

    const std::size_t m = n + extra_rows;
    p.A = qp::Matrix(m, n);
    p.l.assign(m, -kInf);
    p.u.assign(m, kInf);
    for (std::size_t i = 0; i < n; ++i) {  // box rows around x0
      p.A(i, i) = 1.0;
      p.l[i] = x0[i] - rng.uniform(0.2, 2.0);
      p.u[i] = x0[i] + rng.uniform(0.2, 2.0);
    }
    for (std::size_t r = n; r < m; ++r) {
      double ax0 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        p.A(r, j) = rng.uniform(-1.0, 1.0);
        ax0 += p.A(r, j) * x0[j];
      }
      if (trial % 4 == 0 && r == n) {
        p.l[r] = p.u[r] = ax0;  // an equality row through the interior point
      } else {
        p.l[r] = ax0 - rng.uniform(0.3, 2.0);
        p.u[r] = ax0 + rng.uniform(0.3, 2.0);
      }
    }

    const qp::Result r = qp::Solver().solve(p);
    REQUIRE(r.status == qp::Status::kSolved);
    const testsupport::BarrierResult ref = testsupport::reference_solve(p, x0);
    REQUIRE(ref.converged);

    const double obj = qp::objective_value(p, r.x);
    CHECK(obj == doctest::Approx(ref.objective).epsilon(1e-7));
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(r.x[j] == doctest::Approx(ref.x[j]).epsilon(1e-5).scale(1.0));
    }
    CHECK(qp::kkt_residuals(p, r.x, r.y).max() < 1e-7);
  }
}

TEST_CASE("warm starts reproduce the cold-start solution") {
  Rng rng(55);
  qp::Problem p;
  const std::size_t n = 4;
  p.P = qp::Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) p.P(i, i) = 1.0 + rng.uniform(0.0, 2.0);
  p.q = {1.0, -2.0, 0.5, -0.25};
  p.A = qp::Matrix(n, n);
  p.l.assign(n, -1.0);
  p.u.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) p.A(i, i) = 1.0;

  const qp::Result cold = qp::Solver().solve(p);
  REQUIRE(cold.status == qp::Status::kSolved);
  const qp::Result warm = qp::Solver().solve(p, &cold.x, &cold.y);
  REQUIRE(warm.status == qp::Status::kSolved);
  for (std::size_t j = 0; j < n; ++j) {
    CHECK(warm.x[j] == doctest::Approx(cold.x[j]).epsilon(1e-10));
  }
  CHECK(warm.iterations <= cold.iterations);
}
