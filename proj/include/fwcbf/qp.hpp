#ifndef FWCBF_QP_HPP
#define FWCBF_QP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fwcbf {

/// Linear inequality coeffs . u + offset >= 0.
struct ConstraintRow {
  Eigen::VectorXd coeffs;
  double offset = 0.0;

  double value(const Eigen::VectorXd& u) const { return coeffs.dot(u) + offset; }
};

/// min 1/2 |u - u_hat|^2  s.t.  rows satisfied, lower <= u <= upper.
struct QPProblem {
  Eigen::VectorXd u_hat;
  std::vector<ConstraintRow> rows;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const { return u_hat.size(); }
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QPSolution {
  Eigen::VectorXd u;
  /// Multipliers in the order [rows..., lower bounds..., upper bounds...].
  Eigen::VectorXd multipliers;
  std::size_t iterations = 0;
};

namespace detail {

// Uniform view of general rows and box bounds as n_i . u >= b_i.
class QPConstraints {
 public:
  explicit QPConstraints(const QPProblem& p) : p_(p), n_(p.size()) {}

  std::size_t count() const { return p_.rows.size() + 2 * static_cast<std::size_t>(n_); }

  double slack(std::size_t i, const Eigen::VectorXd& u) const {
    const std::size_t m = p_.rows.size();
    if (i < m) return p_.rows[i].value(u);
    const Eigen::Index j = static_cast<Eigen::Index>(i - m);
    if (j < n_) return u(j) - p_.lower(j);
    return p_.upper(j - n_) - u(j - n_);
  }

  Eigen::VectorXd normal(std::size_t i) const {
    const std::size_t m = p_.rows.size();
    if (i < m) return p_.rows[i].coeffs;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    const Eigen::Index j = static_cast<Eigen::Index>(i - m);
    if (j < n_) {
      e(j) = 1.0;
    } else {
      e(j - n_) = -1.0;
    }
    return e;
  }

  bool vacuous(std::size_t i) const {
    return i < p_.rows.size() && p_.rows[i].coeffs.isZero(0.0);
  }

 private:
  const QPProblem& p_;
  Eigen::Index n_;
};

}  // namespace detail

inline void validate(const QPProblem& p) {
  const Eigen::Index n = p.size();
  if (p.lower.size() != n || p.upper.size() != n) {
    throw std::invalid_argument("QPProblem: box dimension mismatch");
  }
  if (!p.u_hat.allFinite() || !p.lower.allFinite() || !p.upper.allFinite()) {
    throw std::invalid_argument("QPProblem: non-finite entries");
  }
  if ((p.lower.array() > p.upper.array()).any()) {
    throw std::invalid_argument("QPProblem: empty box");
  }
  for (const ConstraintRow& r : p.rows) {
    if (r.coeffs.size() != n) {
      throw std::invalid_argument("QPProblem: row dimension mismatch");
    }
    if (!r.coeffs.allFinite() || !std::isfinite(r.offset)) {
      throw std::invalid_argument("QPProblem: non-finite row");
    }
  }
}

/// Dual active-set method (Goldfarb-Idnani) specialised to an identity
/// Hessian. Starts at the unconstrained minimiser u_hat and adds the most
/// violated constraint each outer iteration; the equality subproblem on the
/// working set is solved through a Cholesky factorisation of N^T N.
/// Ties are broken by lowest constraint index.
inline QPSolution solve_qp_detailed(const QPProblem& problem,
                                    double tolerance = 1e-12) {
  validate(problem);
  const detail::QPConstraints cons(problem);
  const std::size_t total = cons.count();
  const Eigen::Index n = problem.size();

  QPSolution sol;
  sol.u = problem.u_hat;
  sol.multipliers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));

  std::vector<std::size_t> active;
  std::vector<double> lambda;  // multipliers of `active`

  const double scale = 1.0 + problem.u_hat.lpNorm<Eigen::Infinity>();
  const std::size_t max_iterations = 50 * (total + static_cast<std::size_t>(n)) + 100;

  auto violation_tol = [&](std::size_t i) {
    return tolerance * scale * (1.0 + cons.normal(i).lpNorm<Eigen::Infinity>());
  };

  while (true) {
    // most violated constraint
    std::size_t p = total;
    double worst = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      if (cons.vacuous(i)) {
        if (cons.slack(i, sol.u) < 0.0) {
          throw InfeasibleError("solve_qp: zero row with negative offset");
        }
        continue;
      }
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double s = cons.slack(i, sol.u);
      if (s < -violation_tol(i)) {
        const double scaled = s / cons.normal(i).norm();
        if (scaled < worst) {
          worst = scaled;
          p = i;
        }
      }
    }
    if (p == total) break;

    const Eigen::VectorXd np = cons.normal(p);
    double lambda_p = 0.0;
    while (true) {
      if (++sol.iterations > max_iterations) {
        throw InfeasibleError("solve_qp: iteration limit reached");
      }
      const Eigen::Index k = static_cast<Eigen::Index>(active.size());
      Eigen::MatrixXd N(n, k);
      for (Eigen::Index j = 0; j < k; ++j) N.col(j) = cons.normal(active[static_cast<std::size_t>(j)]);

      // dual direction r = (N^T N)^-1 N^T n_p, primal direction z = n_p - N r
      Eigen::VectorXd r = Eigen::VectorXd::Zero(k);
      if (k > 0) {
        const Eigen::MatrixXd gram = N.transpose() * N;
        const Eigen::LLT<Eigen::MatrixXd> llt(gram);
        r = llt.solve(N.transpose() * np);
      }
      const Eigen::VectorXd z = np - N * r;

      // partial step limited by an active multiplier reaching zero
      double t_partial = std::numeric_limits<double>::infinity();
      std::size_t drop = active.size();
      for (std::size_t j = 0; j < active.size(); ++j) {
        const double rj = r(static_cast<Eigen::Index>(j));
        if (rj > 1e-14) {
          const double t = lambda[j] / rj;
          if (t < t_partial) {
            t_partial = t;
            drop = j;
          }
        }
      }
      // full step restoring feasibility of p
      double t_full = std::numeric_limits<double>::infinity();
      const double zz = z.dot(np);
      const bool dependent = zz <= 1e-14 * np.squaredNorm();
      if (!dependent) t_full = -cons.slack(p, sol.u) / zz;

      if (dependent && drop == active.size()) {
        throw InfeasibleError("solve_qp: constraints are infeasible");
      }
      const double t = std::min(t_partial, t_full);
      if (!dependent) sol.u += t * z;
      for (std::size_t j = 0; j < active.size(); ++j) {
        lambda[j] -= t * r(static_cast<Eigen::Index>(j));
      }
      lambda_p += t;

      if (t_full <= t_partial) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      lambda.erase(lambda.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }

  for (std::size_t j = 0; j < active.size(); ++j) {
    sol.multipliers(static_cast<Eigen::Index>(active[j])) = std::max(0.0, lambda[j]);
  }
  return sol;
}

inline Eigen::VectorXd solve_qp(const QPProblem& problem) {
  return solve_qp_detailed(problem).u;
}

/// Largest KKT violation at u: stationarity, primal feasibility, dual
/// feasibility and complementary slackness. Multipliers are reconstructed by
/// non-negative least squares over the near-active constraints.
inline double kkt_residual(const QPProblem& problem, const Eigen::VectorXd& u,
                           double active_tol = 1e-7) {
  validate(problem);
  const detail::QPConstraints cons(problem);
  const std::size_t total = cons.count();
  const Eigen::Index n = problem.size();

  double primal = 0.0;
  std::vector<std::size_t> near;
  for (std::size_t i = 0; i < total; ++i) {
    const double s = cons.slack(i, u);
    primal = std::max(primal, -s);
    if (!cons.vacuous(i) && std::abs(s) <= active_tol) near.push_back(i);
  }

  // gradient of the objective must equal sum lambda_i n_i with lambda >= 0
  const Eigen::VectorXd grad = u - problem.u_hat;
  const Eigen::Index k = static_cast<Eigen::Index>(near.size());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
  if (k > 0) {
    Eigen::MatrixXd N(n, k);
    for (Eigen::Index j = 0; j < k; ++j) N.col(j) = cons.normal(near[static_cast<std::size_t>(j)]);
    // projected-gradient NNLS; problems here are tiny
    const Eigen::MatrixXd gram = N.transpose() * N;
    const Eigen::VectorXd rhs = N.transpose() * grad;
    const double lipschitz = std::max(1e-12, gram.operatorNorm());
    for (int it = 0; it < 20000; ++it) {
      const Eigen::VectorXd next =
          (lambda - (gram * lambda - rhs) / lipschitz).cwiseMax(0.0);
      const double change = (next - lambda).lpNorm<Eigen::Infinity>();
      lambda = next;
      if (change < 1e-15) break;
    }
    // refine on the support with an exact least-squares solve
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (lambda(j) > 0.0) support.push_back(j);
    }
    if (!support.empty()) {
      Eigen::MatrixXd Ns(n, static_cast<Eigen::Index>(support.size()));
      for (std::size_t j = 0; j < support.size(); ++j) Ns.col(static_cast<Eigen::Index>(j)) = N.col(support[j]);
      const Eigen::VectorXd ls = Ns.colPivHouseholderQr().solve(grad);
      if ((ls.array() >= 0.0).all()) {
        lambda.setZero();
        for (std::size_t j = 0; j < support.size(); ++j) lambda(support[j]) = ls(static_cast<Eigen::Index>(j));
      }
    }
  }

  Eigen::VectorXd stationarity = grad;
  double complementarity = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const std::size_t i = near[static_cast<std::size_t>(j)];
    stationarity -= lambda(j) * cons.normal(i);
    complementarity = std::max(complementarity, std::abs(lambda(j) * cons.slack(i, u)));
  }
  const double dual = k > 0 ? std::max(0.0, -lambda.minCoeff()) : 0.0;
  return std::max({stationarity.lpNorm<Eigen::Infinity>(), primal, dual,
                   complementarity});
}

}  // namespace fwcbf

#endif  // FWCBF_QP_HPP
