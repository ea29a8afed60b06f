#include "etse/harness.hpp"
#include "etse/hybrid.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace etse;

namespace {

ClosedLoop case_study_loop(double noise_amplitude = 0.0, std::uint64_t seed = 5) {
  const CaseStudyDesign d = case_study_model();
  ClosedLoop loop;
  loop.plant = d.plant;
  loop.observer = d.observer;
  loop.nodes = d.nodes;
  NoiseSignal noise;
  noise.amplitude = {noise_amplitude, noise_amplitude};
  noise.dims = {1, 1};
  noise.seed = seed;
  DisturbanceSpec dist;
  loop.inputs = std::make_shared<ScenarioInputs>(noise, dist);
  return loop;
}

HybridState start(const ClosedLoop& loop, const Vector& x0, const Vector& z0) {
  const double tm = loop.nodes[0].tau_miet;
  return make_initial_state(loop, x0, z0, Vector::Zero(2), Vector::Zero(2), Vector::Constant(2, tm),
                            Vector::Zero(2));
}

std::vector<double> event_times(const HybridArc& arc, int node) {
  std::vector<double> t;
  for (const auto& ev : arc.events)
    if (ev.node == node) t.push_back(ev.time);
  return t;
}

}  // namespace

TEST_CASE("state packing round-trips") {
  ClosedLoop loop = case_study_loop();
  loop.redundant_observers = true;
  const StateLayout layout(loop);
  CHECK(layout.size() == 6 + 6 + 2 + 2 + 2 + 2 + 2 * (6 + 2));
  HybridState s = start(loop, Vector::LinSpaced(6, 1, 6), Vector::LinSpaced(6, -1, 1));
  s.eta << 0.25, 0.5;
  const HybridState back = layout.unpack(layout.pack(s));
  CHECK((back.x - s.x).norm() == 0.0);
  CHECK((back.eta - s.eta).norm() == 0.0);
  REQUIRE(back.local.size() == 2);
  CHECK((back.local[1].z - s.z).norm() == 0.0);
  CHECK(layout.tau_index(1) == 6 + 6 + 2 + 2 + 1);
}

TEST_CASE("flow rates") {
  ClosedLoop loop = case_study_loop();
  const StateLayout layout(loop);
  HybridState s = start(loop, Vector::Unit(6, 0), Vector::Zero(6));
  s.tau << 0.0, 1.0;
  s.eta << 0.3, 0.0;
  const Vector d = flow_rates(loop, s, {Vector(), Vector::Zero(2)});
  CHECK(d[layout.tau_index(0)] == 1.0);
  CHECK(d[layout.tau_index(1)] == 1.0);
  // Node 0: q = C1 z - y = -1, eps_tilde = 0 - 1, tau < tau_MIET.
  CHECK(d[layout.eta_index(0)] == doctest::Approx(2.0 * 1.0 - 0.05 * 0.3));
  // Node 1 after tau_MIET: q = 0, eps_tilde = 0.
  CHECK(d[layout.eta_index(1)] == doctest::Approx(0.0));
  CHECK(d.segment(6 + 6 + 2, 2).norm() == 0.0);  // what is held

  loop.nodes[0].mode = TriggerMode::time_triggered;
  CHECK(flow_rates(loop, s, {Vector(), Vector::Zero(2)})[layout.eta_index(0)] == 0.0);
}

TEST_CASE("a jump refreshes only the transmitting node") {
  ClosedLoop loop = case_study_loop();
  HybridState s = start(loop, Vector::LinSpaced(6, 1, 2), Vector::Zero(6));
  s.yhat << 0.3, 0.4;
  s.eta << 0.0, 0.2;
  const Vector noise = Vector::Constant(1, 5e-4);
  const HybridState a = apply_jump(loop, s, 1, noise);
  CHECK(a.yhat[0] == 0.3);
  CHECK(a.yhat[1] == doctest::Approx(s.x[2] + 5e-4));
  CHECK(a.what[1] == 5e-4);
  CHECK(a.tau[1] == 0.0);
  CHECK(a.tau[0] == s.tau[0]);
  CHECK(a.eta[0] == 0.0);
  CHECK((a.x - s.x).norm() == 0.0);
  CHECK((a.z - s.z).norm() == 0.0);
  // Noise-aware reset from eps_tilde = 0.4 - (x3 + 5e-4).
  const double et = std::abs(0.4 - s.x[2] - 5e-4);
  CHECK(a.eta[1] == doctest::Approx(6.1623 * 0.7 * std::pow(et - 2e-3, 2)));
  CHECK_THROWS(apply_jump(loop, s, 0, Vector::Zero(2)));
}

TEST_CASE("zero error, zero noise: transmissions exactly every tau_MIET") {
  const ClosedLoop loop = case_study_loop();
  const Vector x0 = Vector::Unit(6, 0);
  const double tm = loop.nodes[0].tau_miet;
  const HybridState s0 = make_initial_state(loop, x0, x0, loop.plant.stacked_output(x0), Vector::Zero(2),
                                            Vector::Constant(2, tm), Vector::Zero(2));
  const HybridArc arc = simulate(loop, s0, 2.0);
  for (int node = 0; node < 2; ++node) {
    const auto t = event_times(arc, node);
    REQUIRE(t.size() == static_cast<std::size_t>(std::floor(2.0 / tm)) + 1);
    CHECK(t.front() == 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] - t[k - 1] == doctest::Approx(tm).epsilon(1e-8));
  }
  for (const auto& [tp, s] : arc.samples) CHECK(std::abs(s.eta.maxCoeff()) < 1e-12);
}

TEST_CASE("simultaneous jumps are ordered by node index at the same time") {
  const ClosedLoop loop = case_study_loop();
  const Vector x0 = Vector::Unit(6, 0);
  const HybridArc arc = simulate(loop, start(loop, x0, Vector::Zero(6)), 0.01);
  REQUIRE(arc.events.size() >= 2);
  CHECK(arc.events[0].node == 0);
  CHECK(arc.events[1].node == 1);
  CHECK(arc.events[0].time == 0.0);
  CHECK(arc.events[1].time == 0.0);
  CHECK(arc.events[0].jump_index == 1);
  CHECK(arc.events[1].jump_index == 2);
}

TEST_CASE("time-triggered event times do not depend on noise") {
  ClosedLoop quiet = case_study_loop(0.0);
  ClosedLoop noisy = case_study_loop(1e-3);
  for (auto* l : {&quiet, &noisy})
    for (auto& p : l->nodes) p.mode = TriggerMode::time_triggered;
  const Vector x0 = Vector::Unit(6, 0);
  const HybridArc a = simulate(quiet, start(quiet, x0, Vector::Zero(6)), 1.0);
  const HybridArc b = simulate(noisy, start(noisy, x0, Vector::Zero(6)), 1.0);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) CHECK(a.events[k].time == doctest::Approx(b.events[k].time));
}

TEST_CASE("periodic mode uses its own period") {
  ClosedLoop loop = case_study_loop();
  for (auto& p : loop.nodes) {
    p.mode = TriggerMode::periodic;
    p.period = 0.05;
  }
  // The period may sit below tau_MIET; without an explicit floor it is its own dwell bound.
  CHECK(loop.nodes[0].min_dwell() == 0.05);
  HybridState s0 = start(loop, Vector::Unit(6, 0), Vector::Zero(6));
  s0.tau.setConstant(0.05);
  const HybridArc arc = simulate(loop, s0, 0.52);
  const auto t = event_times(arc, 0);
  CHECK(t.size() == 11);
  for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] - t[k - 1] == doctest::Approx(0.05).epsilon(1e-8));
}

TEST_CASE("noisy run: no early triggers and eta stays nonnegative") {
  const ClosedLoop loop = case_study_loop(1e-3, 99);
  const HybridArc arc = simulate(loop, start(loop, Vector::Unit(6, 0), Vector::Zero(6)), 3.0);
  const double tm = loop.nodes[0].tau_miet;
  for (const auto& ev : arc.events)
    if (ev.time > 0.0) CHECK(ev.inter_event_time >= tm - 1e-6);
  for (const auto& [tp, s] : arc.samples) CHECK(s.eta.minCoeff() >= -1e-8);
  // Hybrid time domain: t nondecreasing, j increments by one at jumps only.
  for (std::size_t k = 1; k < arc.samples.size(); ++k) {
    const auto& a = arc.samples[k - 1].first;
    const auto& b = arc.samples[k].first;
    CHECK(b.t >= a.t);
    CHECK((b.j == a.j || (b.j == a.j + 1 && b.t == a.t)));
  }
}

TEST_CASE("redundant observers stay synchronized with the remote observer") {
  ClosedLoop shared = case_study_loop(1e-3, 4);
  ClosedLoop redundant = shared;
  redundant.redundant_observers = true;
  const Vector x0 = Vector::Unit(6, 0);
  const HybridArc a = simulate(shared, start(shared, x0, Vector::Zero(6)), 1.0);
  const HybridArc b = simulate(redundant, start(redundant, x0, Vector::Zero(6)), 1.0);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    CHECK(a.events[k].node == b.events[k].node);
    // Different step sequences shift the shallow eta crossings slightly.
    CHECK(std::abs(a.events[k].time - b.events[k].time) <= 1e-5);
  }
  for (const auto& [tp, s] : b.samples) {
    REQUIRE(s.local.size() == 2);
    for (const auto& c : s.local) {
      CHECK((c.z - s.z).norm() <= 1e-9 * (1.0 + s.z.norm()));
      CHECK((c.yhat - s.yhat).norm() <= 1e-9 * (1.0 + s.yhat.norm()));
    }
  }
}

TEST_CASE("sample spacing honours the trace interval") {
  const ClosedLoop loop = case_study_loop(1e-3);
  SimulationOptions opt;
  opt.sample_interval = 0.01;
  const HybridArc arc = simulate(loop, start(loop, Vector::Unit(6, 0), Vector::Zero(6)), 1.0, opt);
  std::size_t flow_pairs = 0;
  for (std::size_t k = 1; k < arc.samples.size(); ++k) {
    const auto& a = arc.samples[k - 1].first;
    const auto& b = arc.samples[k].first;
    if (a.j == b.j && b.t > a.t) ++flow_pairs;
  }
  CHECK(flow_pairs > 0);
  CHECK(arc.samples.size() < 2 * 100 + 4 * arc.events.size() + 10);
  CHECK(arc.final_time() == 1.0);
}

TEST_CASE("tighter tolerances converge to the same event times") {
  const ClosedLoop loop = case_study_loop(1e-3, 21);
  SimulationOptions coarse, fine;
  coarse.tol.rel = 1e-7;
  coarse.tol.abs = 1e-9;
  fine.tol.rel = 1e-11;
  fine.tol.abs = 1e-13;
  fine.tol.event_time = 1e-11;
  const HybridState s0 = start(loop, Vector::Unit(6, 0), Vector::Zero(6));
  const HybridArc a = simulate(loop, s0, 0.5, coarse);
  const HybridArc b = simulate(loop, s0, 0.5, fine);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) CHECK(std::abs(a.events[k].time - b.events[k].time) < 1e-5);
}

TEST_CASE("finite differences of eps along the flow match the network-error rate") {
  const ClosedLoop loop = case_study_loop(1e-3, 8);
  const StateLayout layout(loop);
  const HybridArc arc = simulate(loop, start(loop, Vector::Unit(6, 0), Vector::Zero(6)), 1.0);
  IntegratorTolerances tol;
  tol.rel = 1e-13;
  tol.abs = 1e-15;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, arc.samples.size() - 1);
  const double h = 1e-4;
  const SegmentInput quiet{Vector(), Vector::Zero(2)};
  const RateFn rates = [&](double, const Vector& y, Vector& dy) { dy = flow_rates(loop, layout.unpack(y), quiet); };
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const HybridState s = arc.samples[pick(rng)].second;
    std::vector<Vector> eps;
    Vector y = layout.pack(s);
    for (int step = 0; step <= 4; ++step) {
      if (step > 0) y = integrate_flow(y, rates, {}, (step - 1) * h, step * h, tol).segment.back().y;
      const HybridState u = layout.unpack(y);
      eps.push_back(derived_errors(loop.plant, loop.observer, u.x, u.z, u.yhat, u.what, Vector::Zero(2)).eps);
      if (step == 2) {
        const Vector e = loop.observer.estimate(u.z) - u.x;
        const Vector g = error_flow_g(loop.plant, loop.observer, u.z, e, eps.back(), u.what, Vector());
        eps.push_back(g);  // stored after the midpoint sample
      }
    }
    const Vector& g = eps[3];
    const Vector fd = (eps[0] - 8.0 * eps[1] + 8.0 * eps[4] - eps[5]) / (12.0 * h);
    worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-3));
  }
  CHECK(worst <= 1e-6);
}
