// Adaptive Dormand-Prince 5(4) flow integration with guard localization.
//
// The integrator advances a dense state vector over a time span and watches a
// set of scalar guards. A guard is *active* when its value is >= 0. Flow stops
// at the earliest instant any guard becomes active; that instant is bracketed
// by bisection on the continuous extension of the accepted step until both the
// bracket width is below `event_time` and the guard value at the reported time
// is below `guard_value` in magnitude (or the bracket collapses to adjacent
// floating-point numbers).
#pragma once

#include "etse/types.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace etse {

struct IntegratorTolerances {
  double rel = 1e-8;
  double abs = 1e-10;
  double event_time = 1e-9;
  double guard_value = 1e-8;
  /// Steps shorter than min_step * max(1, |t|) abort the integration.
  double min_step = 1e-14;
  /// 0 means unlimited.
  double max_step = 0.0;
};

using RateFn = std::function<void(double t, const Vector& y, Vector& dydt)>;
using GuardFn = std::function<double(double t, const Vector& y)>;

struct TimedState {
  double t = 0.0;
  Vector y;
};

struct GuardHit {
  std::size_t guard = 0;
  double t = 0.0;
  double value = 0.0;
};

struct FlowResult {
  /// Accepted step endpoints, starting with the initial state. The last entry
  /// is the state at the guard hit or at the end of the span.
  std::vector<TimedState> segment;
  std::optional<GuardHit> hit;
  /// Step size suggestion for a continuation.
  double next_step = 0.0;
  std::size_t rate_evaluations = 0;
};

/// Integrates `rates` from (t0, y0) to t1, stopping early at the first guard
/// activation. If `record_steps` is false only the initial and final states are
/// kept in the segment. `step_hint` <= 0 selects an automatic initial step.
FlowResult integrate_flow(const Vector& y0, const RateFn& rates, std::span<const GuardFn> guards,
                          double t0, double t1, const IntegratorTolerances& tol,
                          double step_hint = 0.0, bool record_steps = true);

}  // namespace etse
