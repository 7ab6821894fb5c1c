#include "fwcbf/qp.hpp"

#include <random>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace fwcbf {
namespace {

using testing::qp_enumeration_oracle;
using testing::qp_feasible;
using testing::qp_objective;
using testing::random_small_qp;

QPProblem box_problem(Eigen::VectorXd u_hat, double lo, double hi) {
  QPProblem p;
  const Eigen::Index n = u_hat.size();
  p.u_hat = std::move(u_hat);
  p.lower = Eigen::VectorXd::Constant(n, lo);
  p.upper = Eigen::VectorXd::Constant(n, hi);
  return p;
}

ConstraintRow row(std::initializer_list<double> coeffs, double offset) {
  ConstraintRow r;
  r.coeffs.resize(static_cast<Eigen::Index>(coeffs.size()));
  Eigen::Index k = 0;
  for (double c : coeffs) r.coeffs(k++) = c;
  r.offset = offset;
  return r;
}

TEST(SolveQp, InteriorNominalReturnedExactly) {
  QPProblem p = box_problem(Eigen::Vector2d{0.3, -0.2}, -1, 1);
  p.rows.push_back(row({1, 1}, 5));
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_EQ(u, p.u_hat);
  EXPECT_EQ(kkt_residual(p, p.u_hat), 0.0);
}

TEST(SolveQp, HalfspaceProjection) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -10, 10);
  p.rows.push_back(row({1, 0}, -1));  // u1 >= 1
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_NEAR(u(0), 1.0, 1e-14);
  EXPECT_NEAR(u(1), 0.0, 1e-14);
  EXPECT_LE(kkt_residual(p, u), 1e-12);
}

TEST(SolveQp, ObliqueHalfspace) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -10, 10);
  p.rows.push_back(row({1, 1}, -2));  // u1 + u2 >= 2
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_NEAR(u(0), 1.0, 1e-14);
  EXPECT_NEAR(u(1), 1.0, 1e-14);
}

TEST(SolveQp, BoxAndRowTogether) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -10, 10);
  p.upper(0) = 0.5;
  p.rows.push_back(row({1, 1}, -2));
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_NEAR(u(0), 0.5, 1e-14);
  EXPECT_NEAR(u(1), 1.5, 1e-14);
  const QPSolution s = solve_qp_detailed(p);
  // row multiplier 1.5, upper bound of u1 multiplier 1
  EXPECT_NEAR(s.multipliers(0), 1.5, 1e-12);
  EXPECT_NEAR(s.multipliers(1 + 2 + 0), 1.0, 1e-12);
}

TEST(SolveQp, NominalOutsideBoxIsClipped) {
  const QPProblem p = box_problem(Eigen::Vector3d{30, -1, 0.5}, -2, 2);
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_EQ(u, Eigen::Vector3d(2, -1, 0.5));
}

TEST(SolveQp, VacuousRowIgnored) {
  QPProblem p = box_problem(Eigen::Vector2d{3, 4}, -10, 10);
  p.rows.push_back(row({0, 0}, 1.0));
  EXPECT_EQ(solve_qp(p), p.u_hat);
}

TEST(SolveQp, InfeasibleDetected) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -1, 1);
  p.rows.push_back(row({1, 0}, -2));  // u1 >= 2 against u1 <= 1
  EXPECT_THROW(solve_qp(p), InfeasibleError);

  QPProblem q = box_problem(Eigen::Vector2d{0, 0}, -10, 10);
  q.rows.push_back(row({1, 1}, -1));  // u1 + u2 >= 1
  q.rows.push_back(row({-1, -1}, -1));  // u1 + u2 <= -1
  EXPECT_THROW(solve_qp(q), InfeasibleError);

  QPProblem r = box_problem(Eigen::Vector2d{0, 0}, -1, 1);
  r.rows.push_back(row({0, 0}, -0.5));  // zero row, negative offset
  EXPECT_THROW(solve_qp(r), InfeasibleError);
}

TEST(SolveQp, RejectsMalformedProblems) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -1, 1);
  p.lower(1) = 2;
  EXPECT_THROW(solve_qp(p), std::invalid_argument);
  QPProblem q = box_problem(Eigen::Vector2d{0, 0}, -1, 1);
  q.rows.push_back(row({1, 0, 0}, 0));
  EXPECT_THROW(solve_qp(q), std::invalid_argument);
  QPProblem r = box_problem(Eigen::Vector2d{NAN, 0}, -1, 1);
  EXPECT_THROW(solve_qp(r), std::invalid_argument);
}

TEST(SolveQp, DegenerateDuplicateRows) {
  QPProblem p = box_problem(Eigen::Vector2d{0, 0}, -10, 10);
  p.rows.push_back(row({1, 1}, -2));
  p.rows.push_back(row({2, 2}, -4));
  p.rows.push_back(row({1, 1}, -2));
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_NEAR(u(0), 1.0, 1e-12);
  EXPECT_NEAR(u(1), 1.0, 1e-12);
  EXPECT_LE(kkt_residual(p, u), 1e-10);
}

TEST(SolveQp, RandomProblemsKktAndOracle) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 1000; ++k) {
    const QPProblem p = random_small_qp(rng);
    const Eigen::VectorXd u = solve_qp(p);
    EXPECT_LE(kkt_residual(p, u), 1e-8) << "problem " << k;
    const auto oracle = qp_enumeration_oracle(p);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_LE(qp_objective(p, u) - qp_objective(p, *oracle), 1e-4);
    EXPECT_LE((u - *oracle).norm(), 1e-6) << "problem " << k;
  }
}

TEST(SolveQp, NoSampledFeasiblePointDoesBetter) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const QPProblem p = random_small_qp(rng);
    const double best = qp_objective(p, solve_qp(p));
    for (int s = 0; s < 10000; ++s) {
      Eigen::VectorXd x(p.size());
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        x(j) = p.lower(j) + unit(rng) * (p.upper(j) - p.lower(j));
      }
      if (!qp_feasible(p, x, 0.0)) continue;
      EXPECT_GE(qp_objective(p, x), best - 1e-12);
    }
  }
}

TEST(KktResidual, DetectsPerturbation) {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> sign(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const QPProblem p = random_small_qp(rng);
    Eigen::VectorXd u = solve_qp(p);
    for (Eigen::Index j = 0; j < u.size(); ++j) u(j) += sign(rng) ? 1e-2 : -1e-2;
    EXPECT_GT(kkt_residual(p, u), 1e-3) << "problem " << k;
  }
}

TEST(SolveQp, Deterministic) {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 50; ++k) {
    const QPProblem p = random_small_qp(rng);
    const QPSolution a = solve_qp_detailed(p);
    const QPSolution b = solve_qp_detailed(p);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.iterations, b.iterations);
  }
}

TEST(SolveQp, LargerProblemStaysAccurate) {
  // 60 variables, 190 rows: the size of the 20-vehicle filter
  std::mt19937_64 rng(35);
  std::normal_distribution<double> g(0.0, 1.0);
  QPProblem p = box_problem(Eigen::VectorXd::Zero(60), -5, 5);
  const Eigen::VectorXd inside = Eigen::VectorXd::Constant(60, 0.5);
  for (int j = 0; j < 60; ++j) p.u_hat(j) = 3 * g(rng);
  for (int i = 0; i < 190; ++i) {
    ConstraintRow r;
    r.coeffs = Eigen::VectorXd::Zero(60);
    const int a = i % 20;
    const int b = (i * 7 + 3) % 20;
    for (int c = 0; c < 3; ++c) {
      r.coeffs(3 * a + c) = g(rng);
      r.coeffs(3 * b + c) += g(rng);
    }
    r.offset = -r.coeffs.dot(inside) + 0.1 * std::abs(g(rng));
    p.rows.push_back(r);
  }
  const Eigen::VectorXd u = solve_qp(p);
  EXPECT_LE(kkt_residual(p, u), 1e-8);
}

}  // namespace
}  // namespace fwcbf
