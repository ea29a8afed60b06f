#include "etse/estimation.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace etse {

Matrix finite_difference_jacobian(const VectorMap& fn, const Vector& x) {
  const Vector f0 = fn(x);
  Matrix J(f0.size(), x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (fn(xp) - fn(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

int PlantModel::output_dim() const {
  return std::accumulate(output_dims.begin(), output_dims.end(), 0);
}

int PlantModel::output_offset(int node) const {
  return std::accumulate(output_dims.begin(), output_dims.begin() + node, 0);
}

Vector PlantModel::output(int node, const Vector& x) const { return outputs.at(node)(x); }

Vector PlantModel::stacked_output(const Vector& x) const {
  Vector y(output_dim());
  for (int i = 0; i < node_count(); ++i) y.segment(output_offset(i), output_dims[i]) = output(i, x);
  return y;
}

Matrix PlantModel::output_jacobian(int node, const Vector& x) const {
  if (static_cast<std::size_t>(node) < output_jacobians.size() && output_jacobians[node])
    return output_jacobians[node](x);
  return finite_difference_jacobian(outputs.at(node), x);
}

void PlantModel::validate() const {
  if (n <= 0) throw ConfigError("plant.n: state dimension must be positive");
  if (p < 0) throw ConfigError("plant.p: disturbance dimension must be nonnegative");
  if (output_dims.empty()) throw ConfigError("plant.outputs: at least one sensor node is required");
  if (!dynamics) throw ConfigError("plant.dynamics: missing callable");
  if (outputs.size() != output_dims.size())
    throw ConfigError("plant.outputs: one output map per node is required");
  for (std::size_t i = 0; i < output_dims.size(); ++i) {
    if (output_dims[i] <= 0) throw ConfigError("plant.outputs[" + std::to_string(i) + "]: empty output");
    if (!outputs[i]) throw ConfigError("plant.outputs[" + std::to_string(i) + "]: missing callable");
  }
}

Matrix ObserverModel::jacobian(const Vector& z) const {
  if (estimate_jacobian) return estimate_jacobian(z);
  return finite_difference_jacobian(estimate, z);
}

Vector holding_rate(const ObserverModel& obs, const PlantModel& plant, const Vector& z) {
  const Vector chi = obs.estimate(z);
  const Vector drift = plant.dynamics(chi, Vector::Zero(plant.p));
  Vector rate(plant.output_dim());
  for (int i = 0; i < plant.node_count(); ++i) {
    const Matrix J = plant.output_jacobian(i, chi);
    if (J.cols() != drift.size() || J.rows() != plant.output_dims[i]) {
      std::ostringstream msg;
      msg << "holding_rate: node " << i << " Jacobian is " << J.rows() << "x" << J.cols()
          << " but plant drift has " << drift.size() << " entries";
      throw ConfigError(msg.str());
    }
    rate.segment(plant.output_offset(i), plant.output_dims[i]) = J * drift;
  }
  return rate;
}

Vector observer_rate(const ObserverModel& obs, const Vector& z, const Vector& yhat) {
  return obs.dynamics(z, yhat);
}

ErrorCoordinates derived_errors(const PlantModel& plant, const ObserverModel& obs, const Vector& x,
                                const Vector& z, const Vector& yhat, const Vector& what,
                                const Vector& w) {
  ErrorCoordinates out;
  const Vector chi = obs.estimate(z);
  out.e = chi - x;
  const Vector y = plant.stacked_output(x);
  out.eps = (yhat - what) - y;
  out.eps_tilde = yhat - (y + w);
  out.q.reserve(plant.node_count());
  for (int i = 0; i < plant.node_count(); ++i) {
    const int off = plant.output_offset(i);
    const int mi = plant.output_dims[i];
    out.q.push_back(plant.output(i, chi) - (y.segment(off, mi) + w.segment(off, mi)));
  }
  return out;
}

Vector error_flow_g(const PlantModel& plant, const ObserverModel& obs, const Vector& z,
                    const Vector& e, const Vector& /*eps*/, const Vector& /*what*/, const Vector& v) {
  const Vector chi = obs.estimate(z);
  const Vector x = chi - e;
  const Vector diff = plant.dynamics(chi, Vector::Zero(plant.p)) - plant.dynamics(x, v);
  Vector g(plant.output_dim());
  for (int i = 0; i < plant.node_count(); ++i)
    g.segment(plant.output_offset(i), plant.output_dims[i]) = plant.output_jacobian(i, x) * diff;
  return g;
}

// ---------------------------------------------------------------------------

Matrix stack_outputs(const std::vector<Matrix>& C) {
  Eigen::Index rows = 0;
  for (const auto& Ci : C) rows += Ci.rows();
  Matrix out(rows, C.empty() ? 0 : C.front().cols());
  Eigen::Index r = 0;
  for (const auto& Ci : C) {
    out.middleRows(r, Ci.rows()) = Ci;
    r += Ci.rows();
  }
  return out;
}

PlantModel make_lti_plant(const Matrix& A, const std::vector<Matrix>& C, int disturbance_dim) {
  if (A.rows() != A.cols()) throw ConfigError("A: matrix must be square");
  if (disturbance_dim != 0 && disturbance_dim != A.rows())
    throw ConfigError("disturbance: LTI plants take an additive disturbance of dimension n or none");
  PlantModel plant;
  plant.n = static_cast<int>(A.rows());
  plant.p = disturbance_dim;
  plant.dynamics = [A, disturbance_dim](const Vector& x, const Vector& v) -> Vector {
    if (disturbance_dim == 0) return A * x;
    return A * x + v;
  };
  for (std::size_t i = 0; i < C.size(); ++i) {
    const Matrix Ci = C[i];
    if (Ci.cols() != A.rows())
      throw ConfigError("C[" + std::to_string(i) + "]: column count must equal the state dimension");
    plant.output_dims.push_back(static_cast<int>(Ci.rows()));
    plant.outputs.push_back([Ci](const Vector& x) -> Vector { return Ci * x; });
    plant.output_jacobians.push_back([Ci](const Vector&) -> Matrix { return Ci; });
  }
  return plant;
}

ObserverModel make_luenberger_observer(const Matrix& A, const Matrix& C, const Matrix& gain) {
  if (gain.rows() != A.rows() || gain.cols() != C.rows())
    throw ConfigError("L: gain must be n x m");
  ObserverModel obs;
  obs.q = static_cast<int>(A.rows());
  obs.dynamics = [A, C, gain](const Vector& z, const Vector& yhat) -> Vector {
    return A * z + gain * (C * z - yhat);
  };
  obs.estimate = [](const Vector& z) -> Vector { return z; };
  const auto n = A.rows();
  obs.estimate_jacobian = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  return obs;
}

int observability_rank(const Matrix& A, const Matrix& C, double tol) {
  const auto n = A.rows();
  Matrix O(C.rows() * n, n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    O.middleRows(k * C.rows(), C.rows()) = block;
    block = block * A;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(O);
  qr.setThreshold(tol);
  return static_cast<int>(qr.rank());
}

LtiCaseStudy case_study_matrices() {
  LtiCaseStudy cs;
  cs.A.resize(6, 6);
  cs.A << 0, 2, 0, 0, 0, 1,
         -2, 0, 1, 0, 0, 0,
          0, -1, 0, 2, 0, 0,
          0, 0, -2, 0, 1, 0,
          0, 0, 0, -1, 0, 2,
         -1, 0, 0, 0, -2, 0;
  cs.C1 = Matrix::Zero(1, 6);
  cs.C1(0, 0) = 1.0;
  cs.C2 = Matrix::Zero(1, 6);
  cs.C2(0, 2) = 1.0;
  cs.gain.resize(6, 2);
  cs.gain << -51, 41,
             -92, 86,
              41, -51,
              76, -88,
             205, -205,
             -78, 72;
  return cs;
}

}  // namespace etse
