#include "etse/lti_design.hpp"

#include "doctest.h"

#include <random>

using namespace etse;

namespace {

double max_eig(const Matrix& M) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().maxCoeff();
}

Matrix random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d;
  Matrix X(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) X(r, c) = d(rng);
  return 0.5 * (X + X.transpose());
}

}  // namespace

TEST_CASE("case-study LMI data") {
  const CaseStudyDesign d = case_study_model();
  const LmiProblem& p = d.lmi;
  CHECK(p.n() == 6);
  CHECK(p.m() == 2);
  CHECK(p.rho_v == 2.0);
  CHECK(p.theta == 2.39e4);
  CHECK(p.Q.isApprox(2.0 * Matrix::Identity(2, 2)));
  CHECK(p.gamma_block()(0, 0) == doctest::Approx(0.5 - 6.1623 * 6.1623));
  REQUIRE(d.nodes.size() == 2);
  for (const auto& n : d.nodes) {
    CHECK(n.tau_miet == doctest::Approx(0.056691).epsilon(1e-5));
    CHECK(n.growth == 0.0);
    CHECK(n.sigma == 0.05);
    CHECK(n.beta() == 2.0);
  }
}

TEST_CASE("assembled matrix: shape, symmetry and regression values") {
  const LmiProblem p = case_study_model().lmi;
  const Matrix M = assemble_lmi(p, Matrix::Identity(6, 6));
  REQUIRE(M.rows() == 12);
  REQUIRE(M.cols() == 12);
  CHECK((M - M.transpose()).norm() == 0.0);
  // Reference values from an independent numpy assembly.
  CHECK(max_eig(M) == doctest::Approx(418.2733111756948).epsilon(1e-10));
  CHECK(M.norm() == doctest::Approx(47806.55652306022).epsilon(1e-10));
  CHECK(M.trace() == doctest::Approx(-95848.94788258).epsilon(1e-10));

  const Matrix P0 = lyapunov_warm_start(p);
  CHECK(max_eig(assemble_lmi(p, P0)) == doctest::Approx(49.91499606397633).epsilon(1e-7));
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(P0).eigenvalues().minCoeff() ==
        doctest::Approx(0.017371216029659006).epsilon(1e-7));
}

TEST_CASE("P = 0 leaves only the constant blocks") {
  const LmiProblem p = case_study_model().lmi;
  const Matrix M = assemble_lmi(p, Matrix::Zero(6, 6));
  CHECK(M.block(6, 0, 4, 6).norm() == 0.0);
  CHECK(M.block(6, 6, 2, 2).isApprox(p.gamma_block()));
  CHECK(M.block(8, 8, 2, 2).isApprox(-p.theta * Matrix::Identity(2, 2)));
  CHECK(M.block(10, 10, 2, 2).isApprox(p.Q - p.theta * Matrix::Identity(2, 2)));
  CHECK(M.block(10, 0, 2, 6).isApprox(-p.Q * p.C));
}

TEST_CASE("assembly is affine in P") {
  const LmiProblem p = case_study_model().lmi;
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    const Matrix P1 = random_symmetric(rng, 6), P2 = random_symmetric(rng, 6);
    const double a = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    const Matrix lhs = assemble_lmi(p, a * P1 + (1 - a) * P2);
    const Matrix rhs = a * assemble_lmi(p, P1) + (1 - a) * assemble_lmi(p, P2);
    CHECK((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
  }
}

TEST_CASE("asymmetric P is rejected") {
  const LmiProblem p = case_study_model().lmi;
  Matrix P = Matrix::Identity(6, 6);
  P(0, 1) = 1.0;
  CHECK_THROWS(assemble_lmi(p, P));
}

TEST_CASE("Lyapunov solver") {
  Matrix A(2, 2);
  A << -1, 2, 0, -3;
  const Matrix Q = Matrix::Identity(2, 2);
  const Matrix X = solve_lyapunov(A, Q);
  CHECK((A.transpose() * X + X * A + Q).norm() < 1e-12);
  CHECK((X - X.transpose()).norm() < 1e-12);
}

TEST_CASE("solver finds a certified P for the case study") {
  const LmiProblem p = case_study_model().lmi;
  const SolveResult r = solve_P(p);
  REQUIRE(r.feasible);
  const LmiReport rep = verify_lmi(p, r.P);
  CHECK(rep.feasible);
  CHECK(rep.max_eigenvalue <= rep.tolerance);
  CHECK(rep.tolerance == doctest::Approx(1e-6 * (1.0 + rep.frobenius_norm)));
  CHECK(rep.p_min_eigenvalue > 1e-6);
  CHECK((r.P - r.P.transpose()).norm() == 0.0);
}

TEST_CASE("shrinking theta makes the design infeasible") {
  LmiProblem p = case_study_model().lmi;
  p.theta /= 1e6;
  SolveOptions opt;
  opt.restarts = 2;
  opt.iterations = 3000;
  const SolveResult r = solve_P(p, opt);
  CHECK_FALSE(r.feasible);
  CHECK_FALSE(verify_lmi(p, r.P).feasible);
  // The (Q - theta I) diagonal block alone is positive.
  CHECK(r.best_max_eigenvalue >= 2.0 - p.theta - 1e-9);
}

TEST_CASE("user-supplied P is verified independently of the solver") {
  const LmiProblem p = case_study_model().lmi;
  CHECK_FALSE(verify_lmi(p, Matrix::Identity(6, 6)).feasible);
  CHECK_FALSE(verify_lmi(p, -Matrix::Identity(6, 6)).feasible);
}
