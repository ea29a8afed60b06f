// Per-node transmission logic: minimum inter-event time, the timer-dependent
// weighting omega, the dynamic trigger rate Psi_i, reset policies and the
// mode-specific jump conditions.
#pragma once

#include "etse/ode.hpp"
#include "etse/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace etse {

enum class TriggerMode { event_triggered, time_triggered, periodic };
enum class ResetPolicy { zero, noise_aware };

std::string to_string(TriggerMode mode);
std::string to_string(ResetPolicy policy);

struct NodeTriggerParams {
  double growth = 0.0;   ///< L_i, growth bound of the network error
  double gain = 1.0;     ///< gamma_i, L2 gain from W_i to H_i
  double lambda = 0.5;   ///< tuning parameter in (0, 1)
  double tau_miet = 0.0;
  double sigma = 0.0;    ///< coefficient of the linear sigma_i(eta) = sigma * eta
  double space_reg = 0.0;
  double beta_lo = 1.0;
  double beta_hi = 1.0;
  double w_bar = 0.0;    ///< measurement noise bound used by the noise-aware reset
  double mu = 0.0;       ///< kept for LMI assembly
  Matrix output_weight;  ///< Q_i, positive definite m_i x m_i
  TriggerMode mode = TriggerMode::event_triggered;
  double period = 0.0;   ///< only for TriggerMode::periodic
  ResetPolicy reset = ResetPolicy::zero;
  double dwell_floor = 0.0;  ///< lower dwell constant; 0 selects tau_miet (period when periodic)
  /// The event-triggered jump set is {eta <= eta_tolerance}, absorbing rounding in eta.
  double eta_tolerance = 1e-14;

  /// Optional overrides. Defaults: W_i = |.|, rho_i(q) = q' Q_i q, sigma_i = sigma * eta.
  std::function<double(const Vector&)> w_fn;
  std::function<double(const Vector&)> rho_fn;
  std::function<double(double)> sigma_fn;

  double gamma_bar() const;
  double beta() const;
  double min_dwell() const {
    if (dwell_floor > 0.0) return dwell_floor;
    return mode == TriggerMode::periodic ? period : tau_miet;
  }
  double weight_norm(const Vector& eps) const { return w_fn ? w_fn(eps) : eps.norm(); }
};

/// Builds parameters with tau_miet derived from (growth, gain, lambda).
NodeTriggerParams make_node_params(double growth, double gain, double lambda, int output_dim);

/// Throws ConfigError naming `field_prefix` on violated ranges.
void validate(const NodeTriggerParams& params, int output_dim, const std::string& field_prefix);

/// Closed-form minimum inter-event time. Throws NumericalFailure for
/// parameters where the closed form is not finite.
double compute_miet(double growth, double gain, double lambda);

/// Independent check of compute_miet: integrates dphi/dtau = -2 L phi - gamma (phi^2 + 1)
/// from 1/lambda and returns the first tau with phi = lambda, localized to `tol`.
double phi_ode_oracle(double growth, double gain, double lambda, double tol = 1e-10);

struct PhiTrajectory {
  std::vector<double> tau;
  std::vector<double> phi;
};

/// Samples phi on [0, tau_max] by integrating its ODE (omega switches at tau_miet).
PhiTrajectory phi_trajectory(double growth, double gain, double lambda, double tau_max,
                             const IntegratorTolerances& tol = {});

/// Analytic phi(tau); equals lambda for tau >= tau_miet.
double phi_value(double growth, double gain, double lambda, double tau);

/// Single-valued selection of the omega inclusion; 1 at tau == tau_miet.
int omega(double tau, double tau_miet);

double gamma_bar(double gain, double lambda, double growth);
double beta_coeff(double beta_lo, double beta_hi);

double psi_rate(const NodeTriggerParams& params, const Vector& q, const Vector& eps_tilde,
                double tau, double eta);

double eta_reset(const NodeTriggerParams& params, const Vector& eps_tilde);

bool jump_condition(const NodeTriggerParams& params, double tau, double eta);

/// Scalar guard whose sign encodes jump_condition: >= 0 exactly when it holds.
double guard_value(const NodeTriggerParams& params, double tau, double eta);

}  // namespace etse
