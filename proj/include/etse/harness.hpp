// Scenario configuration, seeded noise, end-to-end runs, metrics and the
// Lyapunov monitor.
#pragma once

#include "etse/hybrid.hpp"
#include "etse/lti_design.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace etse {

/// Counter-based uniform draw in [-1, 1] keyed by (seed, node, component, interval).
double keyed_uniform(std::uint64_t seed, std::uint64_t node, std::uint64_t component,
                     std::int64_t interval);

/// Piecewise-constant bounded noise: a fresh uniform value per component every
/// `dwell` seconds, held until the next one.
struct NoiseSignal {
  std::vector<double> amplitude;  ///< per node
  std::vector<int> dims;          ///< per node
  double dwell = 1e-4;
  std::uint64_t seed = 0;

  bool silent() const;
  std::int64_t interval_index(double t) const;
  Vector sample_interval(int node, std::int64_t k) const;
  Vector sample(int node, double t) const;
  Vector stacked_interval(std::int64_t k) const;
  Vector stacked(double t) const;
};

/// v(t) = values[k] on [times[k], times[k+1]); zero before times[0].
struct DisturbanceSpec {
  int dim = 0;
  std::vector<double> times;
  std::vector<Vector> values;

  Vector at(double t) const;
  double next_break(double t) const;
};

class ScenarioInputs final : public InputSchedule {
 public:
  ScenarioInputs(NoiseSignal noise, DisturbanceSpec disturbance)
      : noise_(std::move(noise)), disturbance_(std::move(disturbance)) {}
  double next_break(double t) const override;
  SegmentInput on(double t_begin, double t_end) const override;
  const NoiseSignal& noise() const { return noise_; }

 private:
  NoiseSignal noise_;
  DisturbanceSpec disturbance_;
};

enum class ModelKind { case_study, lti, plugin };

struct ScenarioConfig {
  ModelKind model_kind = ModelKind::case_study;
  PlantModel plant;
  ObserverModel observer;
  std::vector<NodeTriggerParams> nodes;
  /// Present for LTI models (case study included); enables design and monitoring.
  std::optional<LmiProblem> lmi;
  std::optional<Matrix> P;
  bool monitor = true;

  Vector x0, z0, yhat0, what0, tau0, eta0;
  double horizon = 20.0;
  SimulationOptions sim;
  NoiseSignal noise;
  DisturbanceSpec disturbance;
  bool redundant_observers = false;
  std::string output_dir;
  /// Canonical JSON text of the parsed configuration (echoed into summaries).
  std::string source;

  ClosedLoop closed_loop() const;
  HybridState initial_state(const ClosedLoop& loop) const;
};

/// Parses a JSON document; throws ConfigError with the failing field path.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);

/// Loads a model from a shared library exporting the plugin entry point
/// (see etse/etse_plugin.h). Fills plant and observer.
void load_plugin_model(const std::string& path, const std::string& params_json, PlantModel& plant,
                       ObserverModel& observer);

struct IetStats {
  std::size_t events = 0;
  std::size_t intervals = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// Per-node statistics of the gaps between consecutive transmissions. Only
/// gaps whose closing event lies at or after `from_time` are counted.
std::vector<IetStats> iet_stats(const std::vector<EventRecord>& events, int node_count,
                                double from_time = 0.0);

struct JumpCheck {
  int node = 0;
  double t = 0.0;
  double decrement = 0.0;  ///< U(after) - U(before)
  double predicted = 0.0;  ///< eta0 - eta - gamma phi(tau) W^2(eps)
};

struct MonitorLog {
  std::vector<double> t;
  std::vector<double> U;
  std::vector<JumpCheck> jumps;
  double jump_tolerance = 1e-10;
  std::size_t jump_violations = 0;
  double max_jump_decrement = -std::numeric_limits<double>::infinity();
  std::size_t flow_increases = 0;
  double max_flow_increase = 0.0;
};

/// U = e'Pe + sum_i gamma_i phi_i(tau_i) W_i(eps_i)^2 + eta_i.
double lyapunov_value(const ClosedLoop& loop, const Matrix& P, const HybridState& s);

/// Evaluates U along the arc. A jump is a violation when the predicted
/// decrement exceeds jump_tol or the evaluated one exceeds jump_tol * max(1, U).
/// Flow increases larger than flow_rel_tol * (1 + U) are counted.
MonitorLog lyapunov_monitor(const HybridArc& arc, const ClosedLoop& loop, const Matrix& P,
                            double jump_tol = 1e-10, double flow_rel_tol = 1e-6);

struct SimulationReport {
  HybridArc arc;
  std::vector<IetStats> stats;
  std::vector<double> tau_miet;
  std::vector<double> trace_t;
  std::vector<double> error_norm;
  double ultimate_bound = 0.0;  ///< sup |e| over the final 25% of the horizon
  double final_error = 0.0;
  double max_sampled_noise = 0.0;
  bool noise_within_bounds = true;
  std::optional<MonitorLog> monitor;
  /// Certificate of the P used by the monitor (absent if not monitored).
  std::optional<LmiReport> lmi_report;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string config_echo;
  double horizon = 0.0;
};

SimulationReport run_scenario(const ScenarioConfig& config);

/// sup |e(t)| over t >= (1 - fraction) * horizon.
double ultimate_bound(const std::vector<double>& t, const std::vector<double>& error_norm,
                      double horizon, double fraction = 0.25);

/// Writes events.csv, trace.csv and summary.json into `dir` (created if needed).
void write_outputs(const SimulationReport& report, const ScenarioConfig& config,
                   const std::string& dir);
std::string summary_json(const SimulationReport& report);

/// One run per amplitude (shared seed); returns (amplitude, ultimate bound).
/// Amplitudes must be ascending and start at 0. Noise-aware nodes use the
/// amplitude as their noise bound.
std::vector<std::pair<double, double>> iss_sweep(const ScenarioConfig& base,
                                                 const std::vector<double>& amplitudes);

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace etse
