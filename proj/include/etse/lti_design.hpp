// Observer/trigger co-design for LTI plants: the 4x4-block matrix inequality
// certifying the L2-gain condition, a verifier, and a small eigenvalue
// minimization solver for the Lyapunov matrix P.
#pragma once

#include "etse/estimation.hpp"
#include "etse/triggering.hpp"
#include "etse/types.hpp"

#include <cstdint>
#include <vector>

namespace etse {

struct LmiProblem {
  Matrix A;
  Matrix C;        ///< stacked C_i (m x n)
  Matrix gain;     ///< Luenberger gain L (n x m)
  Matrix Q;        ///< block-diagonal output weight (m x m)
  Vector mu;       ///< per node
  Vector gamma;    ///< per node
  std::vector<int> output_dims;
  double rho_v = 0.0;
  double theta = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(C.rows()); }
  /// diag(mu_i - gamma_i^2), expanded over each node's output block.
  Matrix gamma_block() const;
  void validate() const;
};

struct LmiReport {
  double max_eigenvalue = 0.0;
  double p_min_eigenvalue = 0.0;
  double tolerance = 0.0;  ///< feasibility threshold on max_eigenvalue
  double frobenius_norm = 0.0;
  /// Frobenius norm of the positive-semidefinite part of the assembled matrix.
  double residual_norm = 0.0;
  bool feasible = false;
};

/// Symmetric (n+3m) x (n+3m) matrix; P must be symmetric.
Matrix assemble_lmi(const LmiProblem& problem, const Matrix& P);

/// feasible <=> max_eigenvalue <= tol_scale * (1 + ||M||_F) and P > 0.
LmiReport verify_lmi(const LmiProblem& problem, const Matrix& P, double tol_scale = 1e-6);

/// Solves A' X + X A = -Q (A must have no eigenvalue pairs summing to zero).
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// Initializer: (A+LC)' P + P (A+LC) = -(rho_V P + A'C'CA + C'QC + I).
/// Throws NumericalFailure if A + LC + rho_V/2 I is not Hurwitz.
Matrix lyapunov_warm_start(const LmiProblem& problem);

struct SolveOptions {
  int restarts = 8;
  int iterations = 20000;  ///< per restart
  std::uint64_t seed = 1;
  double p_floor = 1e-6;       ///< projection cone {P >= p_floor I}
  double restart_scale = 0.1;  ///< relative size of random restart perturbations
  double tol_scale = 1e-6;
};

struct SolveResult {
  bool feasible = false;
  Matrix P;                    ///< feasible P, or the best iterate found
  double best_max_eigenvalue = 0.0;
  int restarts_used = 0;
  long iterations = 0;
  LmiReport report;
};

/// Projected subgradient descent (Polyak steps) on the largest eigenvalue of
/// assemble_lmi over {P >= p_floor I}, starting from the Lyapunov warm start
/// and then from random symmetric perturbations of it.
SolveResult solve_P(const LmiProblem& problem, const SolveOptions& options = {});

struct CaseStudyDesign {
  LtiCaseStudy matrices;
  PlantModel plant;
  ObserverModel observer;
  std::vector<NodeTriggerParams> nodes;
  LmiProblem lmi;
};

/// Benchmark plant, observer, trigger constants and LMI data.
CaseStudyDesign case_study_model();

/// Builds the LMI from an LTI plant description and per-node trigger params.
LmiProblem make_lmi_problem(const Matrix& A, const std::vector<Matrix>& C, const Matrix& gain,
                            const std::vector<NodeTriggerParams>& nodes, double rho_v, double theta);

}  // namespace etse
