#include "etse/harness.hpp"

#include <algorithm>
#include <cmath>

namespace etse {
namespace {

struct NodeTerms {
  double weighted = 0.0;  // gamma phi(tau) W^2(eps)
  double eta = 0.0;
};

NodeTerms node_terms(const ClosedLoop& loop, int i, const HybridState& s, const Vector& y) {
  const auto& p = loop.nodes[i];
  const int off = loop.plant.output_offset(i);
  const int mi = loop.plant.output_dims[i];
  const Vector eps = s.yhat.segment(off, mi) - s.what.segment(off, mi) - y.segment(off, mi);
  const double w = p.weight_norm(eps);
  const double phi = phi_value(p.growth, p.gain, p.lambda, s.tau[i]);
  return {p.gain * phi * w * w, s.eta[i]};
}

}  // namespace

double lyapunov_value(const ClosedLoop& loop, const Matrix& P, const HybridState& s) {
  const Vector e = loop.observer.estimate(s.z) - s.x;
  const Vector y = loop.plant.stacked_output(s.x);
  double U = e.dot(P * e);
  for (int i = 0; i < loop.node_count(); ++i) {
    const NodeTerms t = node_terms(loop, i, s, y);
    U += t.weighted + t.eta;
  }
  return U;
}

MonitorLog lyapunov_monitor(const HybridArc& arc, const ClosedLoop& loop, const Matrix& P,
                            double jump_tol, double flow_rel_tol) {
  if (P.rows() != loop.plant.n || P.cols() != loop.plant.n)
    throw ConfigError("lmi.P: monitor requires an n x n Lyapunov matrix");
  MonitorLog log;
  log.jump_tolerance = jump_tol;
  log.t.reserve(arc.samples.size());
  log.U.reserve(arc.samples.size());
  for (const auto& [tp, s] : arc.samples) {
    log.t.push_back(tp.t);
    log.U.push_back(lyapunov_value(loop, P, s));
  }

  std::size_t next_event = 0;
  for (std::size_t k = 1; k < arc.samples.size(); ++k) {
    const auto& [tp0, s0] = arc.samples[k - 1];
    const auto& [tp1, s1] = arc.samples[k];
    if (tp1.j == tp0.j + 1) {
      while (next_event < arc.events.size() && arc.events[next_event].jump_index < tp1.j) ++next_event;
      if (next_event >= arc.events.size()) break;
      const int i = arc.events[next_event].node;
      const Vector y = loop.plant.stacked_output(s0.x);
      const NodeTerms before = node_terms(loop, i, s0, y);
      JumpCheck c;
      c.node = i;
      c.t = tp1.t;
      c.decrement = log.U[k] - log.U[k - 1];
      c.predicted = s1.eta[i] - before.eta - before.weighted;
      if (c.predicted > jump_tol || c.decrement > jump_tol * std::max(1.0, std::abs(log.U[k - 1])))
        ++log.jump_violations;
      log.max_jump_decrement = std::max(log.max_jump_decrement, c.predicted);
      log.jumps.push_back(c);
    } else if (tp1.j == tp0.j) {
      const double rise = log.U[k] - log.U[k - 1];
      if (rise > flow_rel_tol * (1.0 + std::abs(log.U[k - 1]))) {
        ++log.flow_increases;
        log.max_flow_increase = std::max(log.max_flow_increase, rise);
      }
    }
  }
  return log;
}

}  // namespace etse
