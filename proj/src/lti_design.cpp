#include "etse/lti_design.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace etse {

Matrix LmiProblem::gamma_block() const {
  Matrix G = Matrix::Zero(m(), m());
  int off = 0;
  for (std::size_t i = 0; i < output_dims.size(); ++i) {
    const double d = mu[static_cast<Eigen::Index>(i)] - gamma[static_cast<Eigen::Index>(i)] * gamma[static_cast<Eigen::Index>(i)];
    for (int k = 0; k < output_dims[i]; ++k) G(off + k, off + k) = d;
    off += output_dims[i];
  }
  return G;
}

void LmiProblem::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) throw ConfigError("lmi.A: must be square and nonempty");
  if (C.cols() != A.rows()) throw ConfigError("lmi.C: column count must equal n");
  if (gain.rows() != A.rows() || gain.cols() != C.rows()) throw ConfigError("lmi.L: must be n x m");
  if (Q.rows() != C.rows() || Q.cols() != C.rows()) throw ConfigError("lmi.Q: must be m x m");
  int total = 0;
  for (int d : output_dims) total += d;
  if (total != C.rows()) throw ConfigError("lmi.output_dims: must sum to m");
  if (mu.size() != static_cast<Eigen::Index>(output_dims.size()) ||
      gamma.size() != static_cast<Eigen::Index>(output_dims.size()))
    throw ConfigError("lmi.mu/gamma: one entry per node required");
  if (!(rho_v > 0.0)) throw ConfigError("lmi.rho_V: must be > 0");
  if (!(theta > 0.0)) throw ConfigError("lmi.theta: must be > 0");
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() != Eigen::Success) throw ConfigError("lmi.Q: must be positive definite");
}

namespace {

void require_symmetric(const Matrix& P) {
  if (P.rows() != P.cols()) throw std::invalid_argument("P: must be square");
  if ((P - P.transpose()).norm() > 1e-12 * (1.0 + P.norm()))
    throw std::invalid_argument("P: must be symmetric");
}

}  // namespace

Matrix assemble_lmi(const LmiProblem& pr, const Matrix& P) {
  require_symmetric(P);
  if (P.rows() != pr.n()) throw std::invalid_argument("P: must be n x n");
  const int n = pr.n();
  const int m = pr.m();
  const Matrix Acl = pr.A + pr.gain * pr.C;
  const Matrix CA = pr.C * pr.A;
  const Matrix Lambda = Acl.transpose() * P + P * Acl + pr.rho_v * P + CA.transpose() * CA +
                        pr.C.transpose() * pr.Q * pr.C;
  const Matrix PL = P * pr.gain;
  const Matrix CtQ = pr.C.transpose() * pr.Q;
  const Matrix I = Matrix::Identity(m, m);

  Matrix M = Matrix::Zero(n + 3 * m, n + 3 * m);
  M.block(0, 0, n, n) = Lambda;
  M.block(0, n, n, m) = -PL;
  M.block(0, n + m, n, m) = -PL;
  M.block(0, n + 2 * m, n, m) = -CtQ;
  M.block(n, 0, m, n) = -PL.transpose();
  M.block(n + m, 0, m, n) = -PL.transpose();
  M.block(n + 2 * m, 0, m, n) = -CtQ.transpose();
  M.block(n, n, m, m) = pr.gamma_block();
  M.block(n + m, n + m, m, m) = -pr.theta * I;
  M.block(n + 2 * m, n + 2 * m, m, m) = pr.Q - pr.theta * I;
  // Lambda is symmetric only up to rounding; enforce exact symmetry.
  return 0.5 * (M + M.transpose());
}

LmiReport verify_lmi(const LmiProblem& problem, const Matrix& P, double tol_scale) {
  const Matrix M = assemble_lmi(problem, P);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_m(M);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_p(P);
  if (eig_m.info() != Eigen::Success || eig_p.info() != Eigen::Success)
    throw NumericalFailure("verify_lmi: symmetric eigensolver did not converge");
  LmiReport r;
  r.max_eigenvalue = eig_m.eigenvalues().maxCoeff();
  r.p_min_eigenvalue = eig_p.eigenvalues().minCoeff();
  r.frobenius_norm = M.norm();
  r.tolerance = tol_scale * (1.0 + r.frobenius_norm);
  const Vector pos = eig_m.eigenvalues().cwiseMax(0.0);
  r.residual_norm = pos.norm();
  r.feasible = r.max_eigenvalue <= r.tolerance && r.p_min_eigenvalue > 0.0;
  return r;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix At = A.transpose();
  Matrix K = Matrix::Zero(n * n, n * n);
  // vec(A' X + X A) = (I kron A' + A' kron I) vec(X), column-major vec.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * At;
      K.block(i * n, j * n, n, n) += At(i, j) * I;
    }
  const Vector rhs = -Eigen::Map<const Vector>(Q.data(), n * n);
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw NumericalFailure("solve_lyapunov: singular Lyapunov operator");
  const Vector x = lu.solve(rhs);
  const Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

Matrix lyapunov_warm_start(const LmiProblem& pr) {
  const auto n = pr.n();
  const Matrix shifted = pr.A + pr.gain * pr.C + 0.5 * pr.rho_v * Matrix::Identity(n, n);
  Eigen::EigenSolver<Matrix> es(shifted);
  if (es.info() != Eigen::Success) throw NumericalFailure("lyapunov_warm_start: eigensolver failed");
  if ((es.eigenvalues().real().array() >= 0.0).any())
    throw NumericalFailure("lyapunov_warm_start: A + LC + rho_V/2 I is not Hurwitz");
  const Matrix CA = pr.C * pr.A;
  const Matrix rhs = CA.transpose() * CA + pr.C.transpose() * pr.Q * pr.C + Matrix::Identity(n, n);
  return solve_lyapunov(shifted, rhs);
}

namespace {

// Affine parametrization M(P) = M0 + sum_k p_k M_k over a basis of symmetric P.
struct AffineLmi {
  std::vector<Matrix> basis;
  std::vector<Matrix> slopes;
  Matrix offset;
  int n;

  explicit AffineLmi(const LmiProblem& pr) : n(pr.n()) {
    offset = assemble_lmi(pr, Matrix::Zero(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Matrix E = Matrix::Zero(n, n);
        E(i, j) = E(j, i) = 1.0;
        slopes.push_back(assemble_lmi(pr, E) - offset);
        basis.push_back(std::move(E));
      }
  }

  Vector to_params(const Matrix& P) const {
    Vector p(static_cast<Eigen::Index>(basis.size()));
    Eigen::Index k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) p[k++] = 0.5 * (P(i, j) + P(j, i));
    return p;
  }

  Matrix to_matrix(const Vector& p) const {
    Matrix P = Matrix::Zero(n, n);
    Eigen::Index k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        P(i, j) = p[k];
        P(j, i) = p[k];
        ++k;
      }
    return P;
  }

  Matrix value(const Vector& p) const {
    Matrix M = offset;
    for (std::size_t k = 0; k < slopes.size(); ++k) M += p[static_cast<Eigen::Index>(k)] * slopes[k];
    return M;
  }
};

Matrix project_floor(const Matrix& P, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  const Vector clamped = es.eigenvalues().cwiseMax(floor);
  const Matrix out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

SolveResult solve_P(const LmiProblem& problem, const SolveOptions& opt) {
  problem.validate();
  const AffineLmi lmi(problem);
  const int n = problem.n();

  Matrix start;
  try {
    start = lyapunov_warm_start(problem);
  } catch (const NumericalFailure&) {
    start = Matrix::Identity(n, n);
  }
  start = project_floor(start, opt.p_floor);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SolveResult result;
  result.best_max_eigenvalue = std::numeric_limits<double>::infinity();
  const double tol = opt.tol_scale * (1.0 + assemble_lmi(problem, start).norm());
  const double target = -tol;

  for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
    Matrix P0 = start;
    if (restart > 0) {
      Matrix S(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) S(i, j) = S(j, i) = normal(rng);
      P0 = project_floor(start + opt.restart_scale * start.norm() / S.norm() * S, opt.p_floor);
    }
    Vector p = lmi.to_params(P0);
    Vector best_p = p;
    double best = std::numeric_limits<double>::infinity();
    Vector grad(p.size());

    for (int it = 0; it < opt.iterations; ++it) {
      ++result.iterations;
      Eigen::SelfAdjointEigenSolver<Matrix> es(lmi.value(p));
      if (es.info() != Eigen::Success) throw NumericalFailure("solve_P: eigensolver did not converge");
      const Eigen::Index top = es.eigenvalues().size() - 1;
      const double f = es.eigenvalues()[top];
      if (f < best) {
        best = f;
        best_p = p;
      }
      if (f <= 0.0) break;
      const Vector v = es.eigenvectors().col(top);
      for (std::size_t k = 0; k < lmi.slopes.size(); ++k)
        grad[static_cast<Eigen::Index>(k)] = v.dot(lmi.slopes[k] * v);
      const double gg = grad.squaredNorm();
      if (gg == 0.0) break;
      p -= ((f - target) / gg) * grad;
      p = lmi.to_params(project_floor(lmi.to_matrix(p), opt.p_floor));
    }

    result.restarts_used = restart + 1;
    const Matrix candidate = lmi.to_matrix(best_p);
    if (best < result.best_max_eigenvalue) {
      result.best_max_eigenvalue = best;
      result.P = candidate;
    }
    const LmiReport report = verify_lmi(problem, candidate, opt.tol_scale);
    if (report.feasible) {
      result.feasible = true;
      result.P = candidate;
      result.best_max_eigenvalue = best;
      result.report = report;
      return result;
    }
  }
  result.report = verify_lmi(problem, result.P, opt.tol_scale);
  return result;
}

LmiProblem make_lmi_problem(const Matrix& A, const std::vector<Matrix>& C, const Matrix& gain,
                            const std::vector<NodeTriggerParams>& nodes, double rho_v, double theta) {
  if (nodes.size() != C.size()) throw ConfigError("lmi: one trigger record per output block required");
  LmiProblem pr;
  pr.A = A;
  pr.C = stack_outputs(C);
  pr.gain = gain;
  const auto N = static_cast<Eigen::Index>(C.size());
  pr.mu.resize(N);
  pr.gamma.resize(N);
  pr.Q = Matrix::Zero(pr.C.rows(), pr.C.rows());
  int off = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const int mi = static_cast<int>(C[i].rows());
    pr.output_dims.push_back(mi);
    pr.mu[i] = nodes[i].mu;
    pr.gamma[i] = nodes[i].gain;
    pr.Q.block(off, off, mi, mi) = nodes[i].output_weight;
    off += mi;
  }
  pr.rho_v = rho_v;
  pr.theta = theta;
  return pr;
}

CaseStudyDesign case_study_model() {
  CaseStudyDesign d;
  d.matrices = case_study_matrices();
  const auto& cs = d.matrices;
  const std::vector<Matrix> C{cs.C1, cs.C2};
  d.plant = make_lti_plant(cs.A, C);
  d.observer = make_luenberger_observer(cs.A, stack_outputs(C), cs.gain);
  for (int i = 0; i < 2; ++i) {
    NodeTriggerParams p = make_node_params(0.0, cs.constants.gamma, cs.constants.lambda, 1);
    p.sigma = cs.constants.sigma;
    p.mu = cs.constants.mu;
    p.output_weight = Matrix::Constant(1, 1, cs.constants.Q);
    p.w_bar = cs.constants.w_bar;
    p.reset = ResetPolicy::noise_aware;
    p.mode = TriggerMode::event_triggered;
    d.nodes.push_back(std::move(p));
  }
  d.lmi = make_lmi_problem(cs.A, C, cs.gain, d.nodes, cs.constants.rho_v, cs.constants.theta);
  return d;
}

}  // namespace etse
