// Plant, observer and holding-function models, plus the error coordinates
// derived from the physical simulation state.
#pragma once

#include "etse/types.hpp"

#include <functional>
#include <vector>

namespace etse {

using VectorMap = std::function<Vector(const Vector&)>;
using JacobianMap = std::function<Matrix(const Vector&)>;

/// Central finite-difference Jacobian with step 1e-6 * (1 + |x_j|).
Matrix finite_difference_jacobian(const VectorMap& fn, const Vector& x);

/// Plant dx/dt = f_p(x, v), sensed by N nodes through y_i = h_{p,i}(x).
struct PlantModel {
  int n = 0;
  int p = 0;
  std::vector<int> output_dims;
  std::function<Vector(const Vector& x, const Vector& v)> dynamics;
  std::vector<VectorMap> outputs;
  /// Entries may be empty; the finite-difference fallback is used then.
  std::vector<JacobianMap> output_jacobians;

  int node_count() const { return static_cast<int>(output_dims.size()); }
  int output_dim() const;
  int output_offset(int node) const;

  Vector output(int node, const Vector& x) const;
  Vector stacked_output(const Vector& x) const;
  Matrix output_jacobian(int node, const Vector& x) const;

  /// Throws ConfigError when the callables and dimension fields disagree.
  void validate() const;
};

/// Observer dz/dt = f_o(z, yhat) with state estimate chi = h_o(z).
struct ObserverModel {
  int q = 0;
  std::function<Vector(const Vector& z, const Vector& yhat)> dynamics;
  VectorMap estimate;
  JacobianMap estimate_jacobian;  // optional

  Matrix jacobian(const Vector& z) const;
};

/// e = chi - x, eps = yhat_noise_free - y, eps_tilde = yhat - y_measured,
/// q_i = h_{p,i}(chi) - y_measured_i.
struct ErrorCoordinates {
  Vector e;
  Vector eps;
  Vector eps_tilde;
  std::vector<Vector> q;
};

/// Model-based extrapolation rate of the held outputs (all nodes stacked).
Vector holding_rate(const ObserverModel& obs, const PlantModel& plant, const Vector& z);

Vector observer_rate(const ObserverModel& obs, const Vector& z, const Vector& yhat);

ErrorCoordinates derived_errors(const PlantModel& plant, const ObserverModel& obs, const Vector& x,
                                const Vector& z, const Vector& yhat, const Vector& what,
                                const Vector& w);

/// Rate of the noise-free network error in error coordinates, with the plant
/// state reconstructed as x = h_o(z) - e. Independent of eps and what by
/// construction; they are accepted to mirror the hybrid flow signature.
Vector error_flow_g(const PlantModel& plant, const ObserverModel& obs, const Vector& z,
                    const Vector& e, const Vector& eps, const Vector& what, const Vector& v);

// ---------------------------------------------------------------------------
// Linear time-invariant specialization
// ---------------------------------------------------------------------------

/// dx/dt = A x (+ v when p == n), y_i = C_i x.
PlantModel make_lti_plant(const Matrix& A, const std::vector<Matrix>& C, int disturbance_dim = 0);

/// Luenberger observer dchi/dt = A chi + L (C chi - yhat), chi = z.
ObserverModel make_luenberger_observer(const Matrix& A, const Matrix& C, const Matrix& gain);

/// Stacks per-node output matrices row-wise.
Matrix stack_outputs(const std::vector<Matrix>& C);

/// Rank of [C; CA; ...; CA^{n-1}] via column-pivoted QR.
int observability_rank(const Matrix& A, const Matrix& C, double tol = 1e-9);

/// Matrices and design constants of the three-oscillator benchmark.
struct LtiCaseStudy {
  Matrix A;
  Matrix C1;
  Matrix C2;
  Matrix gain;  // 6x2 Luenberger gain
  struct Constants {
    double mu = 0.5;
    double rho_v = 2.0;
    double Q = 2.0;
    double gamma = 6.1623;
    double theta = 2.39e4;
    double lambda = 0.7;
    double sigma = 0.05;
    double w_bar = 1e-3;
  } constants;
};

LtiCaseStudy case_study_matrices();

}  // namespace etse
