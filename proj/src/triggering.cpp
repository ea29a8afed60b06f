#include "etse/triggering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace etse {

std::string to_string(TriggerMode mode) {
  switch (mode) {
    case TriggerMode::event_triggered: return "event_triggered";
    case TriggerMode::time_triggered: return "time_triggered";
    case TriggerMode::periodic: return "periodic";
  }
  return "unknown";
}

std::string to_string(ResetPolicy policy) {
  return policy == ResetPolicy::zero ? "zero" : "noise_aware";
}

double NodeTriggerParams::gamma_bar() const { return etse::gamma_bar(gain, lambda, growth); }

double NodeTriggerParams::beta() const { return beta_coeff(beta_lo, beta_hi); }

NodeTriggerParams make_node_params(double growth, double gain, double lambda, int output_dim) {
  NodeTriggerParams p;
  p.growth = growth;
  p.gain = gain;
  p.lambda = lambda;
  p.tau_miet = compute_miet(growth, gain, lambda);
  p.output_weight = Matrix::Identity(output_dim, output_dim);
  return p;
}

void validate(const NodeTriggerParams& p, int output_dim, const std::string& field) {
  auto fail = [&](const std::string& name, const std::string& why) {
    throw ConfigError(field + "." + name + ": " + why);
  };
  if (!(p.growth >= 0.0) || !std::isfinite(p.growth)) fail("L", "must be finite and >= 0");
  if (!(p.gain > 0.0) || !std::isfinite(p.gain)) fail("gamma", "must be finite and > 0");
  if (!(p.lambda > 0.0 && p.lambda < 1.0)) fail("lambda", "must lie in (0, 1)");
  if (!(p.sigma >= 0.0)) fail("sigma", "must be >= 0");
  if (!(p.space_reg >= 0.0)) fail("s", "must be >= 0");
  if (!(p.beta_lo > 0.0) || !(p.beta_hi >= p.beta_lo)) fail("beta", "need 0 < beta_lo <= beta_hi");
  if (!(p.w_bar >= 0.0)) fail("w_bar", "must be >= 0");
  const double limit = compute_miet(p.growth, p.gain, p.lambda);
  if (!(p.tau_miet > 0.0)) fail("tau_miet", "must be > 0");
  if (p.tau_miet > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "exceeds the guaranteed bound " << limit << " for (L, gamma, lambda)";
    fail("tau_miet", msg.str());
  }
  if (p.dwell_floor < 0.0 || p.dwell_floor > p.tau_miet) fail("dwell_floor", "must lie in (0, tau_miet]");
  if (p.mode == TriggerMode::periodic && !(p.period > 0.0 && p.period >= p.dwell_floor && p.period <= p.tau_miet))
    fail("period", "must lie in (0, tau_miet] and be >= dwell_floor");
  if (!(p.eta_tolerance >= 0.0)) fail("eta_tolerance", "must be >= 0");
  if (p.output_weight.rows() != output_dim || p.output_weight.cols() != output_dim)
    fail("Q", "must be m_i x m_i");
  if (!p.rho_fn) {
    Eigen::LLT<Matrix> llt(0.5 * (p.output_weight + p.output_weight.transpose()));
    if (llt.info() != Eigen::Success) fail("Q", "must be positive definite");
  }
}

double compute_miet(double L, double gamma, double lambda) {
  double tau = 0.0;
  if (L == 0.0) {
    tau = (std::atan(1.0 / lambda) - std::atan(lambda)) / gamma;
  } else {
    const double ratio = gamma / L;
    const double r = std::sqrt(std::abs(ratio * ratio - 1.0));
    const double arg = r * (1.0 - lambda) / (2.0 * lambda / (1.0 + lambda) * (ratio - 1.0) + 1.0 + lambda);
    if (gamma > L) {
      tau = std::atan(arg) / (L * r);
    } else if (gamma == L) {
      tau = (1.0 - lambda) / (1.0 + lambda) / L;
    } else {
      tau = std::atanh(arg) / (L * r);
    }
  }
  if (!std::isfinite(tau) || tau <= 0.0) {
    std::ostringstream msg;
    msg << "compute_miet: infeasible tuning (L=" << L << ", gamma=" << gamma << ", lambda=" << lambda
        << ") gives non-finite inter-event time";
    throw NumericalFailure(msg.str());
  }
  return tau;
}

double phi_ode_oracle(double L, double gamma, double lambda, double tol) {
  const RateFn rates = [L, gamma](double, const Vector& y, Vector& dy) {
    dy.resize(1);
    dy[0] = -2.0 * L * y[0] - gamma * (y[0] * y[0] + 1.0);
  };
  const std::array<GuardFn, 1> guards{[lambda](double, const Vector& y) { return lambda - y[0]; }};
  // |dphi/dtau| >= gamma on [lambda, 1/lambda], which bounds the crossing time.
  const double horizon = 2.0 * (1.0 / lambda - lambda) / gamma + 1.0;
  IntegratorTolerances itol;
  itol.rel = 1e-13;
  itol.abs = 1e-15;
  itol.event_time = tol;
  itol.guard_value = 1e-15;
  itol.min_step = 1e-18;
  Vector y0(1);
  y0[0] = 1.0 / lambda;
  const auto res = integrate_flow(y0, rates, guards, 0.0, horizon, itol, 0.0, false);
  if (!res.hit) throw NumericalFailure("phi_ode_oracle: horizon exhausted before phi reached lambda");
  return res.hit->t;
}

PhiTrajectory phi_trajectory(double L, double gamma, double lambda, double tau_max,
                             const IntegratorTolerances& tol) {
  PhiTrajectory out;
  const double tau_miet = compute_miet(L, gamma, lambda);
  const RateFn rates = [L, gamma](double, const Vector& y, Vector& dy) {
    dy.resize(1);
    dy[0] = -2.0 * L * y[0] - gamma * (y[0] * y[0] + 1.0);
  };
  Vector y0(1);
  y0[0] = 1.0 / lambda;
  const double flow_end = std::min(tau_max, tau_miet);
  const auto res = integrate_flow(y0, rates, {}, 0.0, flow_end, tol);
  for (const auto& s : res.segment) {
    out.tau.push_back(s.t);
    out.phi.push_back(s.y[0]);
  }
  // omega = 1 beyond tau_miet freezes phi at lambda.
  if (tau_max > tau_miet) {
    out.tau.push_back(tau_miet);
    out.phi.push_back(lambda);
    out.tau.push_back(tau_max);
    out.phi.push_back(lambda);
  }
  return out;
}

double phi_value(double L, double gamma, double lambda, double tau) {
  if (tau < 0.0) throw std::invalid_argument("phi_value: tau must be >= 0");
  if (tau >= compute_miet(L, gamma, lambda)) return lambda;
  // u = phi + a obeys du/dtau = -gamma (u^2 + 1 - a^2).
  const double a = L / gamma;
  const double u0 = 1.0 / lambda + a;
  double u = 0.0;
  if (a < 1.0) {
    const double b = std::sqrt(1.0 - a * a);
    u = b * std::tan(std::atan(u0 / b) - gamma * b * tau);
  } else if (a == 1.0) {
    u = 1.0 / (1.0 / u0 + gamma * tau);
  } else {
    const double b = std::sqrt(a * a - 1.0);
    const double k = (u0 - b) / (u0 + b) * std::exp(-2.0 * b * gamma * tau);
    u = b * (1.0 + k) / (1.0 - k);
  }
  return std::clamp(u - a, lambda, 1.0 / lambda);
}

int omega(double tau, double tau_miet) { return tau < tau_miet ? 0 : 1; }

double gamma_bar(double gain, double lambda, double growth) {
  return 2.0 * gain * lambda * growth + gain * gain * (1.0 + lambda * lambda);
}

double beta_coeff(double beta_lo, double beta_hi) {
  return 2.0 * (beta_hi * beta_hi) / (beta_lo * beta_lo);
}

double psi_rate(const NodeTriggerParams& p, const Vector& q, const Vector& eps_tilde, double tau,
                double eta) {
  const double rho = p.rho_fn ? p.rho_fn(q) : q.dot(p.output_weight * q);
  const double w = p.weight_norm(eps_tilde);
  const double sig = p.sigma_fn ? p.sigma_fn(eta) : p.sigma * eta;
  return rho - omega(tau, p.tau_miet) * p.gamma_bar() * p.beta() * w * w - sig + p.space_reg;
}

double eta_reset(const NodeTriggerParams& p, const Vector& eps_tilde) {
  if (p.reset == ResetPolicy::zero) return 0.0;
  const double excess = p.beta_lo * std::max(eps_tilde.norm() - 2.0 * p.w_bar, 0.0);
  return p.gain * p.lambda * excess * excess;
}

double guard_value(const NodeTriggerParams& p, double tau, double eta) {
  switch (p.mode) {
    case TriggerMode::event_triggered: return std::min(tau - p.tau_miet, p.eta_tolerance - eta);
    case TriggerMode::time_triggered: return tau - p.tau_miet;
    case TriggerMode::periodic: return tau - p.period;
  }
  return -1.0;
}

bool jump_condition(const NodeTriggerParams& p, double tau, double eta) {
  return guard_value(p, tau, eta) >= 0.0;
}

}  // namespace etse
