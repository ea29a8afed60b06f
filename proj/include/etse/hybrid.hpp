// Hybrid closed loop of plant, remote observer and N asynchronous sensor
// triggers, simulated in physical coordinates (x, z, yhat, what, tau, eta).
//
// One deterministic solution of the hybrid inclusion is computed: flow until
// some node's jump condition holds, then jump that node immediately. Nodes
// whose conditions hold at the same instant jump in ascending index order at
// the same t with consecutive jump counters.
#pragma once

#include "etse/estimation.hpp"
#include "etse/ode.hpp"
#include "etse/triggering.hpp"

#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace etse {

/// Copy of the observer state held by a sensor node (redundant mode only).
struct ObserverCopy {
  Vector z;
  Vector yhat;
};

struct HybridState {
  Vector x;
  Vector z;
  Vector yhat;  ///< held output estimate, stacked over nodes
  Vector what;  ///< sampled noise at each node's last transmission
  Vector tau;
  Vector eta;
  /// Empty unless the loop runs redundant observers; entry i belongs to node i.
  std::vector<ObserverCopy> local;
};

struct HybridTimePoint {
  double t = 0.0;
  int j = 0;
};

struct EventRecord {
  int node = 0;  ///< zero-based
  double time = 0.0;
  int jump_index = 0;  ///< value of j after the jump
  double inter_event_time = 0.0;
  double eta_before = 0.0;
  double eta_after = 0.0;
};

struct HybridArc {
  std::vector<std::pair<HybridTimePoint, HybridState>> samples;
  std::vector<EventRecord> events;

  double final_time() const { return samples.empty() ? 0.0 : samples.back().first.t; }
  int jump_count() const { return samples.empty() ? 0 : samples.back().first.j; }
};

/// Exogenous inputs, piecewise constant between breakpoints.
struct SegmentInput {
  Vector v;  ///< process disturbance
  Vector w;  ///< measurement noise, stacked over nodes
};

class InputSchedule {
 public:
  virtual ~InputSchedule() = default;
  /// Smallest breakpoint strictly greater than t (+inf if none).
  virtual double next_break(double t) const = 0;
  /// Input value held on [t_begin, t_end); t_end <= next_break(t_begin).
  virtual SegmentInput on(double t_begin, double t_end) const = 0;
};

class ZeroInput final : public InputSchedule {
 public:
  ZeroInput(int disturbance_dim, int output_dim) : p_(disturbance_dim), m_(output_dim) {}
  double next_break(double) const override { return std::numeric_limits<double>::infinity(); }
  SegmentInput on(double, double) const override { return {Vector::Zero(p_), Vector::Zero(m_)}; }

 private:
  int p_;
  int m_;
};

struct ClosedLoop {
  PlantModel plant;
  ObserverModel observer;
  std::vector<NodeTriggerParams> nodes;
  std::shared_ptr<const InputSchedule> inputs;
  bool redundant_observers = false;

  int node_count() const { return plant.node_count(); }
  /// Throws ConfigError on inconsistent dimensions or trigger parameters.
  void validate() const;
};

/// Packing between HybridState and the flat vector seen by the integrator.
class StateLayout {
 public:
  explicit StateLayout(const ClosedLoop& loop);
  Eigen::Index size() const { return size_; }
  Vector pack(const HybridState& s) const;
  HybridState unpack(const Vector& y) const;
  Eigen::Index tau_index(int node) const { return tau_ + node; }
  Eigen::Index eta_index(int node) const { return eta_ + node; }

 private:
  int n_, q_, m_, N_;
  bool redundant_;
  Eigen::Index x_ = 0, z_, yhat_, what_, tau_, eta_, local_, size_;
};

/// Initial state satisfying the synchronization assumption: every node copy
/// (if any) starts from the shared z0 / yhat0.
HybridState make_initial_state(const ClosedLoop& loop, const Vector& x0, const Vector& z0,
                               const Vector& yhat0, const Vector& what0, const Vector& tau0,
                               const Vector& eta0);

/// Time derivative of the packed state for a held input.
Vector flow_rates(const ClosedLoop& loop, const HybridState& state, const SegmentInput& input);

/// Guard of `node` (>= 0 when its jump condition holds).
double node_guard(const ClosedLoop& loop, int node, const HybridState& state);

/// Transmission of `node`: its held output becomes the current measurement,
/// its timer restarts and eta takes the reset value. Everything else is kept.
HybridState apply_jump(const ClosedLoop& loop, const HybridState& state, int node,
                       const Vector& current_noise);

struct SimulationOptions {
  IntegratorTolerances tol;
  /// Minimum spacing of recorded flow samples; 0 records every accepted step.
  /// States immediately before and after each jump are always recorded.
  double sample_interval = 0.0;
};

/// Runs the greedy hybrid solution from `initial` until t = horizon.
/// Throws AssertionFailure if more than N jumps fall in a window shorter than
/// the smallest dwell floor, SimulationFault on integration failures.
HybridArc simulate(const ClosedLoop& loop, const HybridState& initial, double horizon,
                   const SimulationOptions& options = {});

}  // namespace etse
