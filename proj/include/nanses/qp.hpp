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

#ifndef NANSES_QP_HPP_
#define NANSES_QP_HPP_

// Dense convex QP solver:
//
//   minimize    0.5 x' P x + q' x
//   subject to  l <= A x <= u        (rows with l == u are equalities)
//
// Operator-splitting (ADMM) iterations with a single Cholesky factorization
// of P + sigma I + A' R A, followed by an active-set polish that solves the
// reduced KKT system of the constraints detected active. Problems here are a
// few hundred variables at most, so everything is dense.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nanses/common.hpp"

namespace nanses::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
      out[i] = acc;
    }
    return out;
  }

  std::vector<double> multiply_transpose(const std::vector<double>& y) const {
    std::vector<double> out(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = row(i);
      const double yi = y[i];
      if (yi == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) out[j] += r[j] * yi;
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Problem {
  Matrix P;                // n x n, symmetric positive semidefinite
  std::vector<double> q;   // n
  Matrix A;                // m x n
  std::vector<double> l;   // m, may be -inf
  std::vector<double> u;   // m, may be +inf

  std::size_t num_vars() const { return q.size(); }
  std::size_t num_constraints() const { return l.size(); }
};

struct Settings {
  double eps_abs = 1e-10;
  double eps_rel = 1e-10;
  double sigma = 1e-6;
  double rho = 0.1;
  double rho_eq_scale = 1e3;   // stiffer rho on equality rows
  double alpha = 1.6;          // over-relaxation
  std::size_t max_iterations = 200000;
  std::size_t check_interval = 25;
  bool adaptive_rho = true;
  bool polish = true;
  double polish_reg = 1e-7;
  std::size_t polish_refine_steps = 3;
  double eps_infeasible = 1e-6;
};

enum class Status { kSolved, kMaxIterations, kPrimalInfeasible };

struct Result {
  Status status = Status::kMaxIterations;
  std::vector<double> x;  // primal solution
  std::vector<double> y;  // constraint multipliers
  std::size_t iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  bool polished = false;
  // Row index with the largest infeasibility-certificate weight; meaningful
  // only for kPrimalInfeasible.
  std::size_t infeasible_row = 0;
};

struct KktResiduals {
  double primal = 0.0;      // worst violation of l <= Ax <= u
  double dual = 0.0;        // || Px + q + A'y ||_inf
  double complementarity = 0.0;
  double max() const { return std::max(primal, std::max(dual, complementarity)); }
};

namespace detail {

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// In-place Cholesky of a symmetric positive definite matrix.
inline bool cholesky(Matrix& m) {
  const std::size_t n = m.rows();
  for (std::size_t k = 0; k < n; ++k) {
    double d = m(k, k);
    for (std::size_t j = 0; j < k; ++j) d -= m(k, j) * m(k, j);
    if (d <= 0.0) return false;
    const double lkk = std::sqrt(d);
    m(k, k) = lkk;
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = m(i, k);
      for (std::size_t j = 0; j < k; ++j) s -= m(i, j) * m(k, j);
      m(i, k) = s / lkk;
    }
  }
  return true;
}

inline void cholesky_solve(const Matrix& chol, std::vector<double>& b) {
  const std::size_t n = chol.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= chol(i, j) * b[j];
    b[i] = s / chol(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= chol(j, i) * b[j];
    b[i] = s / chol(i, i);
  }
}

// LDL' of a symmetric quasi-definite matrix, no pivoting. Used for the
// regularized polish KKT system.
inline bool ldlt(Matrix& m, std::vector<double>& d, double pivot_floor) {
  const std::size_t n = m.rows();
  d.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double dk = m(k, k);
    for (std::size_t j = 0; j < k; ++j) dk -= m(k, j) * m(k, j) * d[j];
    if (std::abs(dk) < pivot_floor || !std::isfinite(dk)) return false;
    d[k] = dk;
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = m(i, k);
      for (std::size_t j = 0; j < k; ++j) s -= m(i, j) * m(k, j) * d[j];
      m(i, k) = s / dk;
    }
  }
  return true;
}

inline void ldlt_solve(const Matrix& fac, const std::vector<double>& d, std::vector<double>& b) {
  const std::size_t n = fac.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= fac(i, j) * b[j];
    b[i] = s;
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= d[i];
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= fac(j, i) * b[j];
    b[i] = s;
  }
}

}  // namespace detail

inline KktResiduals kkt_residuals(const Problem& p, const std::vector<double>& x,
                                  const std::vector<double>& y) {
  KktResiduals r;
  for (double v : x) {
    if (!std::isfinite(v)) return {kInf, kInf, kInf};
  }
  for (double v : y) {
    if (!std::isfinite(v)) return {kInf, kInf, kInf};
  }
  const std::vector<double> ax = p.A.multiply(x);
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (std::isfinite(p.l[i])) r.primal = std::max(r.primal, p.l[i] - ax[i]);
    if (std::isfinite(p.u[i])) r.primal = std::max(r.primal, ax[i] - p.u[i]);
    if (p.l[i] < p.u[i]) {  // inequality rows: multiplier sign pairs with a bound
      if (y[i] < 0.0) {
        r.complementarity =
            std::max(r.complementarity, std::isfinite(p.l[i])
                                            ? -y[i] * std::abs(ax[i] - p.l[i])
                                            : -y[i] * 1e6);  // wrong-signed multiplier
      } else if (y[i] > 0.0) {
        r.complementarity =
            std::max(r.complementarity, std::isfinite(p.u[i])
                                            ? y[i] * std::abs(p.u[i] - ax[i])
                                            : y[i] * 1e6);
      }
    }
  }
  std::vector<double> dual = p.P.multiply(x);
  const std::vector<double> aty = p.A.multiply_transpose(y);
  for (std::size_t j = 0; j < dual.size(); ++j) dual[j] += p.q[j] + aty[j];
  r.dual = detail::inf_norm(dual);
  return r;
}

inline double objective_value(const Problem& p, const std::vector<double>& x) {
  const std::vector<double> px = p.P.multiply(x);
  double v = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) v += 0.5 * x[j] * px[j] + p.q[j] * x[j];
  return v;
}

class Solver {
 public:
  explicit Solver(Settings settings = {}) : settings_(settings) {}

  // Solves the problem, optionally warm-starting from (x0, y0).
  Result solve(const Problem& p, const std::vector<double>* x0 = nullptr,
               const std::vector<double>* y0 = nullptr) {
    const std::size_t n = p.num_vars();
    const std::size_t m = p.num_constraints();

    rho_.assign(m, settings_.rho);
    for (std::size_t i = 0; i < m; ++i) {
      if (p.l[i] == p.u[i]) rho_[i] *= settings_.rho_eq_scale;
    }
    factorize(p);

    std::vector<double> x(n, 0.0), z(m, 0.0), y(m, 0.0);
    if (x0 && x0->size() == n) x = *x0;
    if (y0 && y0->size() == m) y = *y0;
    z = p.A.multiply(x);
    for (std::size_t i = 0; i < m; ++i) z[i] = std::clamp(z[i], p.l[i], p.u[i]);

    Result res;
    std::vector<double> rhs(n), ztilde(m), zprev(m), yprev(m);
    std::size_t last_rho_update = 0;

    for (std::size_t iter = 1; iter <= settings_.max_iterations; ++iter) {
      zprev = z;
      yprev = y;

      // x-update: (P + sigma I + A'RA) xt = sigma x - q + A'(R z - y)
      std::vector<double> w(m);
      for (std::size_t i = 0; i < m; ++i) w[i] = rho_[i] * z[i] - y[i];
      rhs = p.A.multiply_transpose(w);
      for (std::size_t j = 0; j < n; ++j) rhs[j] += settings_.sigma * x[j] - p.q[j];
      detail::cholesky_solve(kkt_chol_, rhs);
      const std::vector<double>& xtilde = rhs;
      ztilde = p.A.multiply(xtilde);

      // Over-relaxed x/z/y updates with projection onto [l, u].
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = settings_.alpha * xtilde[j] + (1.0 - settings_.alpha) * x[j];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const double zr = settings_.alpha * ztilde[i] + (1.0 - settings_.alpha) * zprev[i];
        z[i] = std::clamp(zr + y[i] / rho_[i], p.l[i], p.u[i]);
        y[i] += rho_[i] * (zr - z[i]);
      }

      if (iter % settings_.check_interval != 0 && iter != settings_.max_iterations) continue;

      const std::vector<double> ax = p.A.multiply(x);
      double prim = 0.0, prim_scale = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        prim = std::max(prim, std::abs(ax[i] - z[i]));
        // z is always projected into [l, u], so scaling by it keeps the
        // relative tolerance anchored to the data; scaling by Ax would let a
        // diverging iterate (infeasible problem) pass as converged.
        prim_scale = std::max(prim_scale, std::abs(z[i]));
      }
      std::vector<double> px = p.P.multiply(x);
      const std::vector<double> aty = p.A.multiply_transpose(y);
      double dual = 0.0, dual_scale = detail::inf_norm(p.q);
      for (std::size_t j = 0; j < n; ++j) {
        dual = std::max(dual, std::abs(px[j] + p.q[j] + aty[j]));
        dual_scale = std::max(dual_scale, std::max(std::abs(px[j]), std::abs(aty[j])));
      }

      res.iterations = iter;
      res.primal_residual = prim;
      res.dual_residual = dual;

      const double eps_prim = settings_.eps_abs + settings_.eps_rel * prim_scale;
      const double eps_dual = settings_.eps_abs + settings_.eps_rel * dual_scale;
      if (prim <= eps_prim && dual <= eps_dual) {
        res.status = Status::kSolved;
        res.x = x;
        res.y = y;
        break;
      }

      if (prim > 1e-7 * std::max(1.0, prim_scale) &&
          detect_primal_infeasible(p, y, yprev, &res)) {
        res.x = x;
        res.y = y;
        return res;
      }

      if (settings_.adaptive_rho && iter - last_rho_update >= 100) {
        const double pr = prim / std::max(prim_scale, 1e-30);
        const double dr = dual / std::max(dual_scale, 1e-30);
        const double ratio = std::sqrt(pr / std::max(dr, 1e-30));
        if (ratio > 5.0 || ratio < 0.2) {
          const double scale = std::clamp(ratio, 1e-4, 1e4);
          for (double& r : rho_) r = std::clamp(r * scale, 1e-8, 1e8);
          factorize(p);
          last_rho_update = iter;
        }
      }

      if (iter == settings_.max_iterations) {
        res.status = Status::kMaxIterations;
        res.x = x;
        res.y = y;
      }
    }

    if (res.x.empty()) {  // loop ended by break without assignment safeguard
      res.x = x;
      res.y = y;
    }

    if (settings_.polish && res.status == Status::kSolved) polish(p, res);
    return res;
  }

 private:
  void factorize(const Problem& p) {
    const std::size_t n = p.num_vars();
    const std::size_t m = p.num_constraints();
    kkt_chol_ = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) kkt_chol_(i, j) = p.P(i, j);
      kkt_chol_(i, i) += settings_.sigma;
    }
    for (std::size_t r = 0; r < m; ++r) {
      const double* row = p.A.row(r);
      for (std::size_t i = 0; i < n; ++i) {
        if (row[i] == 0.0) continue;
        const double ri = rho_[r] * row[i];
        for (std::size_t j = 0; j < n; ++j) kkt_chol_(i, j) += ri * row[j];
      }
    }
    NANSES_CHECK(detail::cholesky(kkt_chol_), ErrorCategory::kNonConvergence,
                 "QP: ADMM system matrix is not positive definite");
  }

  bool detect_primal_infeasible(const Problem& p, const std::vector<double>& y,
                                const std::vector<double>& yprev, Result* res) const {
    const std::size_t m = p.num_constraints();
    std::vector<double> dy(m);
    double dy_norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dy[i] = y[i] - yprev[i];
      dy_norm = std::max(dy_norm, std::abs(dy[i]));
    }
    if (dy_norm < 1e-14) return false;
    for (double& v : dy) v /= dy_norm;  // normalized certificate candidate
    const std::vector<double> atdy = p.A.multiply_transpose(dy);
    if (detail::inf_norm(atdy) > settings_.eps_infeasible) return false;
    double support = 0.0;
    std::size_t worst_row = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dy[i] > 1e-12) {
        if (!std::isfinite(p.u[i])) return false;
        support += p.u[i] * dy[i];
      } else if (dy[i] < -1e-12) {
        if (!std::isfinite(p.l[i])) return false;
        support += p.l[i] * dy[i];
      }
      if (std::abs(dy[i]) > worst) {
        worst = std::abs(dy[i]);
        worst_row = i;
      }
    }
    if (support < -settings_.eps_infeasible) {
      res->status = Status::kPrimalInfeasible;
      res->infeasible_row = worst_row;
      return true;
    }
    return false;
  }

  // Solves the equality-constrained QP on a detected active set, with static
  // regularization and iterative refinement, and keeps the polished point
  // when it improves the KKT residuals. Tries a primal-distance active set
  // first (catches weakly active rows whose multipliers are still ~0), then
  // the multiplier-sign set.
  void polish(const Problem& p, Result& res) const {
    const std::vector<double> ax = p.A.multiply(res.x);
    const std::size_t m = p.num_constraints();
    double y_scale = 0.0;
    for (double v : res.y) y_scale = std::max(y_scale, std::abs(v));
    const double y_dead = 1e-10 * (1.0 + y_scale);  // multiplier noise floor
    std::vector<std::size_t> active;
    std::vector<double> bound;
    for (std::size_t i = 0; i < m; ++i) {
      const double eps_act = 1e-7 * (1.0 + std::abs(ax[i]));
      if (p.l[i] == p.u[i] || (std::isfinite(p.l[i]) && ax[i] - p.l[i] < eps_act) ||
          res.y[i] < -y_dead) {
        active.push_back(i);
        bound.push_back(p.l[i]);
      } else if ((std::isfinite(p.u[i]) && p.u[i] - ax[i] < eps_act) || res.y[i] > y_dead) {
        active.push_back(i);
        bound.push_back(p.u[i]);
      }
    }
    if (polish_with(p, active, bound, res)) return;
    active.clear();
    bound.clear();
    for (std::size_t i = 0; i < m; ++i) {
      if (p.l[i] == p.u[i] || res.y[i] < -y_dead) {
        active.push_back(i);
        bound.push_back(p.l[i]);
      } else if (res.y[i] > y_dead) {
        active.push_back(i);
        bound.push_back(p.u[i]);
      }
    }
    polish_with(p, active, bound, res);
  }

  bool polish_with(const Problem& p, const std::vector<std::size_t>& active,
                   const std::vector<double>& bound, Result& res) const {
    const std::size_t n = p.num_vars();
    const std::size_t m = p.num_constraints();
    const std::size_t k = active.size();
    const std::size_t dim = n + k;
    double p_scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) p_scale = std::max(p_scale, std::abs(p.P(i, i)));
    const double reg = settings_.polish_reg * p_scale;
    Matrix kkt(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) kkt(i, j) = p.P(i, j);
      kkt(i, i) += reg;
    }
    for (std::size_t a = 0; a < k; ++a) {
      const double* row = p.A.row(active[a]);
      for (std::size_t j = 0; j < n; ++j) {
        kkt(n + a, j) = row[j];
        kkt(j, n + a) = row[j];
      }
      kkt(n + a, n + a) = -reg;
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < dim; ++i) scale = std::max(scale, std::abs(kkt(i, i)));
    std::vector<double> d;
    Matrix fac = kkt;
    if (!detail::ldlt(fac, d, 1e-14 * std::max(scale, 1.0))) return false;

    std::vector<double> sol(dim, 0.0);
    for (std::size_t j = 0; j < n; ++j) sol[j] = -p.q[j];
    for (std::size_t a = 0; a < k; ++a) sol[n + a] = bound[a];
    detail::ldlt_solve(fac, d, sol);

    // Refinement against the unregularized KKT matrix.
    for (std::size_t step = 0; step < settings_.polish_refine_steps; ++step) {
      std::vector<double> resid(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = -p.q[i];
        for (std::size_t j = 0; j < n; ++j) acc -= p.P(i, j) * sol[j];
        for (std::size_t a = 0; a < k; ++a) acc -= p.A(active[a], i) * sol[n + a];
        resid[i] = acc;
      }
      for (std::size_t a = 0; a < k; ++a) {
        double acc = bound[a];
        const double* row = p.A.row(active[a]);
        for (std::size_t j = 0; j < n; ++j) acc -= row[j] * sol[j];
        resid[n + a] = acc;
      }
      detail::ldlt_solve(fac, d, resid);
      for (std::size_t i = 0; i < dim; ++i) sol[i] += resid[i];
    }

    std::vector<double> x_pol(sol.begin(), sol.begin() + n);
    std::vector<double> y_pol(m, 0.0);
    for (std::size_t a = 0; a < k; ++a) y_pol[active[a]] = sol[n + a];

    const KktResiduals before = kkt_residuals(p, res.x, res.y);
    const KktResiduals after = kkt_residuals(p, x_pol, y_pol);
    if (after.max() <= before.max()) {
      res.x = std::move(x_pol);
      res.y = std::move(y_pol);
      res.primal_residual = after.primal;
      res.dual_residual = after.dual;
      res.polished = true;
      return true;
    }
    return false;
  }

  Settings settings_;
  std::vector<double> rho_;
  Matrix kkt_chol_;
};

}  // namespace nanses::qp

#endif  // NANSES_QP_HPP_
