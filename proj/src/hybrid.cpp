#include "etse/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <string>

namespace etse {

void ClosedLoop::validate() const {
  plant.validate();
  if (!observer.dynamics || !observer.estimate) throw ConfigError("observer: missing callables");
  if (observer.q <= 0) throw ConfigError("observer.q: dimension must be positive");
  if (static_cast<int>(nodes.size()) != plant.node_count())
    throw ConfigError("nodes: expected one trigger parameter record per sensor node");
  for (int i = 0; i < node_count(); ++i)
    etse::validate(nodes[i], plant.output_dims[i], "nodes[" + std::to_string(i) + "]");
  if (!inputs) throw ConfigError("inputs: missing input schedule");
}

StateLayout::StateLayout(const ClosedLoop& loop)
    : n_(loop.plant.n),
      q_(loop.observer.q),
      m_(loop.plant.output_dim()),
      N_(loop.node_count()),
      redundant_(loop.redundant_observers) {
  z_ = x_ + n_;
  yhat_ = z_ + q_;
  what_ = yhat_ + m_;
  tau_ = what_ + m_;
  eta_ = tau_ + N_;
  local_ = eta_ + N_;
  size_ = local_ + (redundant_ ? N_ * (q_ + m_) : 0);
}

Vector StateLayout::pack(const HybridState& s) const {
  Vector y(size_);
  y.segment(x_, n_) = s.x;
  y.segment(z_, q_) = s.z;
  y.segment(yhat_, m_) = s.yhat;
  y.segment(what_, m_) = s.what;
  y.segment(tau_, N_) = s.tau;
  y.segment(eta_, N_) = s.eta;
  if (redundant_) {
    for (int i = 0; i < N_; ++i) {
      const Eigen::Index base = local_ + i * (q_ + m_);
      y.segment(base, q_) = s.local.at(i).z;
      y.segment(base + q_, m_) = s.local.at(i).yhat;
    }
  }
  return y;
}

HybridState StateLayout::unpack(const Vector& y) const {
  HybridState s;
  s.x = y.segment(x_, n_);
  s.z = y.segment(z_, q_);
  s.yhat = y.segment(yhat_, m_);
  s.what = y.segment(what_, m_);
  s.tau = y.segment(tau_, N_);
  s.eta = y.segment(eta_, N_);
  if (redundant_) {
    s.local.resize(N_);
    for (int i = 0; i < N_; ++i) {
      const Eigen::Index base = local_ + i * (q_ + m_);
      s.local[i].z = y.segment(base, q_);
      s.local[i].yhat = y.segment(base + q_, m_);
    }
  }
  return s;
}

HybridState make_initial_state(const ClosedLoop& loop, const Vector& x0, const Vector& z0,
                               const Vector& yhat0, const Vector& what0, const Vector& tau0,
                               const Vector& eta0) {
  const int m = loop.plant.output_dim();
  const int N = loop.node_count();
  auto check = [](const Vector& v, Eigen::Index want, const char* name) {
    if (v.size() != want) {
      std::ostringstream msg;
      msg << "initial." << name << ": expected " << want << " entries, got " << v.size();
      throw ConfigError(msg.str());
    }
  };
  check(x0, loop.plant.n, "x0");
  check(z0, loop.observer.q, "z0");
  check(yhat0, m, "yhat0");
  check(what0, m, "what0");
  check(tau0, N, "tau0");
  check(eta0, N, "eta0");
  if ((tau0.array() < 0.0).any()) throw ConfigError("initial.tau0: timers must be >= 0");
  if ((eta0.array() < 0.0).any()) throw ConfigError("initial.eta0: trigger variables must be >= 0");
  HybridState s{x0, z0, yhat0, what0, tau0, eta0, {}};
  if (loop.redundant_observers) s.local.assign(N, ObserverCopy{z0, yhat0});
  return s;
}

namespace {

double node_psi(const ClosedLoop& loop, int i, const HybridState& s, const Vector& y_meas,
                const Vector& z_local, const Vector& yhat_local) {
  const auto& plant = loop.plant;
  const int off = plant.output_offset(i);
  const int mi = plant.output_dims[i];
  const Vector chi = loop.observer.estimate(z_local);
  const Vector meas_i = y_meas.segment(off, mi);
  const Vector q = plant.output(i, chi) - meas_i;
  const Vector eps_tilde = yhat_local.segment(off, mi) - meas_i;
  return psi_rate(loop.nodes[i], q, eps_tilde, s.tau[i], s.eta[i]);
}

}  // namespace

Vector flow_rates(const ClosedLoop& loop, const HybridState& s, const SegmentInput& in) {
  const StateLayout layout(loop);
  const auto& plant = loop.plant;
  const int N = loop.node_count();
  HybridState d;
  d.x = plant.dynamics(s.x, in.v);
  d.z = observer_rate(loop.observer, s.z, s.yhat);
  d.yhat = holding_rate(loop.observer, plant, s.z);
  d.what = Vector::Zero(s.what.size());
  d.tau = Vector::Ones(N);
  d.eta = Vector::Zero(N);
  const Vector y_meas = plant.stacked_output(s.x) + in.w;
  for (int i = 0; i < N; ++i) {
    if (loop.nodes[i].mode != TriggerMode::event_triggered) continue;
    if (loop.redundant_observers)
      d.eta[i] = node_psi(loop, i, s, y_meas, s.local[i].z, s.local[i].yhat);
    else
      d.eta[i] = node_psi(loop, i, s, y_meas, s.z, s.yhat);
  }
  if (loop.redundant_observers) {
    d.local.resize(N);
    for (int i = 0; i < N; ++i) {
      d.local[i].z = observer_rate(loop.observer, s.local[i].z, s.local[i].yhat);
      d.local[i].yhat = holding_rate(loop.observer, plant, s.local[i].z);
    }
  }
  return layout.pack(d);
}

double node_guard(const ClosedLoop& loop, int node, const HybridState& s) {
  return guard_value(loop.nodes[node], s.tau[node], s.eta[node]);
}

HybridState apply_jump(const ClosedLoop& loop, const HybridState& state, int node,
                       const Vector& current_noise) {
  const auto& plant = loop.plant;
  const int off = plant.output_offset(node);
  const int mi = plant.output_dims[node];
  if (current_noise.size() != mi)
    throw std::invalid_argument("apply_jump: noise must match the node's output dimension");
  const auto& params = loop.nodes[node];

  const Vector measured = plant.output(node, state.x) + current_noise;
  const Vector eps_tilde = state.yhat.segment(off, mi) - measured;

  HybridState out = state;
  out.yhat.segment(off, mi) = measured;
  out.what.segment(off, mi) = current_noise;
  for (auto& copy : out.local) copy.yhat.segment(off, mi) = measured;
  out.tau[node] = 0.0;
  out.eta[node] = params.mode == TriggerMode::event_triggered ? eta_reset(params, eps_tilde) : 0.0;
  return out;
}

HybridArc simulate(const ClosedLoop& loop, const HybridState& initial, double horizon,
                   const SimulationOptions& options) {
  loop.validate();
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw ConfigError("horizon: must be finite and >= 0");

  const StateLayout layout(loop);
  const int N = loop.node_count();
  const auto& plant = loop.plant;

  double min_dwell = std::numeric_limits<double>::infinity();
  for (const auto& p : loop.nodes) min_dwell = std::min(min_dwell, p.min_dwell());

  HybridArc arc;
  HybridState state = initial;
  double t = 0.0;
  int j = 0;
  arc.samples.push_back({{t, j}, state});
  double last_recorded = t;

  std::deque<double> recent_jumps;
  double step_hint = 0.0;

  std::vector<GuardFn> guards;
  guards.reserve(N);
  for (int i = 0; i < N; ++i) {
    const auto tau_idx = layout.tau_index(i);
    const auto eta_idx = layout.eta_index(i);
    const NodeTriggerParams* params = &loop.nodes[i];
    guards.push_back([params, tau_idx, eta_idx](double, const Vector& y) {
      return guard_value(*params, y[tau_idx], y[eta_idx]);
    });
  }

  auto segment_end = [&](double from) {
    double next = loop.inputs->next_break(from);
    if (!(next > from)) next = std::nextafter(from, std::numeric_limits<double>::infinity());
    return std::min(horizon, next);
  };

  while (true) {
    // Greedy jumps at the current instant, ascending node index.
    bool jumped = false;
    for (int i = 0; i < N; ++i) {
      if (node_guard(loop, i, state) < 0.0) continue;
      if (!jumped && arc.samples.back().first.t != t) arc.samples.push_back({{t, j}, state});
      jumped = true;

      const SegmentInput input = loop.inputs->on(t, segment_end(t));
      const int off = plant.output_offset(i);
      const Vector noise = input.w.segment(off, plant.output_dims[i]);
      EventRecord rec;
      rec.node = i;
      rec.time = t;
      rec.inter_event_time = state.tau[i];
      rec.eta_before = state.eta[i];
      state = apply_jump(loop, state, i, noise);
      ++j;
      rec.jump_index = j;
      rec.eta_after = state.eta[i];
      arc.events.push_back(rec);
      arc.samples.push_back({{t, j}, state});
      last_recorded = t;

      recent_jumps.push_back(t);
      while (!recent_jumps.empty() && recent_jumps.front() <= t - min_dwell + options.tol.event_time)
        recent_jumps.pop_front();
      if (static_cast<int>(recent_jumps.size()) > N) {
        std::ostringstream msg;
        msg << "Zeno guard: " << recent_jumps.size() << " jumps within a window shorter than "
            << min_dwell << " s ending at t=" << t;
        throw AssertionFailure(msg.str());
      }
    }

    if (t >= horizon) break;

    const double t_end = segment_end(t);
    const SegmentInput input = loop.inputs->on(t, t_end);
    const RateFn rates = [&loop, &layout, &input](double, const Vector& y, Vector& dy) {
      dy = flow_rates(loop, layout.unpack(y), input);
    };
    const bool record_all = options.sample_interval <= 0.0;
    FlowResult flow = integrate_flow(layout.pack(state), rates, guards, t, t_end, options.tol,
                                     step_hint, true);
    step_hint = flow.next_step;

    const std::size_t count = flow.segment.size();
    for (std::size_t k = 1; k < count; ++k) {
      const auto& ts = flow.segment[k];
      const bool last = k + 1 == count;
      if (record_all || ts.t - last_recorded >= options.sample_interval || (last && flow.hit) ||
          (last && ts.t >= horizon)) {
        arc.samples.push_back({{ts.t, j}, layout.unpack(ts.y)});
        last_recorded = ts.t;
      }
    }
    state = layout.unpack(flow.segment.back().y);
    t = flow.segment.back().t;
  }
  return arc;
}

}  // namespace etse
