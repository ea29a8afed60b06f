#include "etse/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

namespace etse {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<IetStats> iet_stats(const std::vector<EventRecord>& events, int node_count,
                                double from_time) {
  std::vector<IetStats> out(static_cast<std::size_t>(node_count));
  std::vector<double> last(static_cast<std::size_t>(node_count), std::nan(""));
  for (const auto& ev : events) {
    if (ev.node < 0 || ev.node >= node_count) throw std::invalid_argument("iet_stats: node index out of range");
    auto& s = out[static_cast<std::size_t>(ev.node)];
    double& prev = last[static_cast<std::size_t>(ev.node)];
    if (ev.time >= from_time) ++s.events;
    if (!std::isnan(prev) && ev.time >= from_time) {
      const double gap = ev.time - prev;
      if (s.intervals == 0) {
        s.min = s.max = gap;
      } else {
        s.min = std::min(s.min, gap);
        s.max = std::max(s.max, gap);
      }
      s.mean += gap;
      ++s.intervals;
    }
    prev = ev.time;
  }
  for (auto& s : out)
    if (s.intervals > 0) s.mean /= static_cast<double>(s.intervals);
  return out;
}

double ultimate_bound(const std::vector<double>& t, const std::vector<double>& error_norm,
                      double horizon, double fraction) {
  const double from = (1.0 - fraction) * horizon;
  double sup = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= from) sup = std::max(sup, error_norm[k]);
  return sup;
}

SimulationReport run_scenario(const ScenarioConfig& config) {
  const ClosedLoop loop = config.closed_loop();
  SimulationReport rep;
  rep.horizon = config.horizon;
  rep.seed = config.noise.seed;
  rep.config_echo = config.source;
  rep.config_hash = fnv1a_hex(config.source);
  rep.arc = simulate(loop, config.initial_state(loop), config.horizon, config.sim);

  const int N = loop.node_count();
  rep.stats = iet_stats(rep.arc.events, N);
  for (const auto& p : loop.nodes) rep.tau_miet.push_back(p.tau_miet);

  rep.trace_t.reserve(rep.arc.samples.size());
  rep.error_norm.reserve(rep.arc.samples.size());
  for (const auto& [tp, s] : rep.arc.samples) {
    rep.trace_t.push_back(tp.t);
    rep.error_norm.push_back((loop.observer.estimate(s.z) - s.x).norm());
  }
  rep.final_error = rep.error_norm.empty() ? 0.0 : rep.error_norm.back();
  rep.ultimate_bound = ultimate_bound(rep.trace_t, rep.error_norm, config.horizon);

  // The sample right after each jump holds the noise value stored by it.
  auto it = rep.arc.samples.begin();
  for (const auto& ev : rep.arc.events) {
    it = std::find_if(it, rep.arc.samples.end(), [&](const auto& smp) { return smp.first.j == ev.jump_index; });
    if (it == rep.arc.samples.end()) break;
    const int off = loop.plant.output_offset(ev.node);
    const int mi = loop.plant.output_dims[ev.node];
    const double peak = it->second.what.segment(off, mi).cwiseAbs().maxCoeff();
    rep.max_sampled_noise = std::max(rep.max_sampled_noise, peak);
    if (peak > config.noise.amplitude[static_cast<std::size_t>(ev.node)]) rep.noise_within_bounds = false;
  }

  if (config.monitor && config.lmi) {
    Matrix P;
    if (config.P) {
      P = *config.P;
      rep.lmi_report = verify_lmi(*config.lmi, P);
    } else {
      const SolveResult sol = solve_P(*config.lmi);
      P = sol.P;
      rep.lmi_report = sol.report;
    }
    rep.monitor = lyapunov_monitor(rep.arc, loop, P);
  }
  return rep;
}

std::string summary_json(const SimulationReport& rep) {
  json j;
  j["horizon"] = rep.horizon;
  j["seed"] = rep.seed;
  j["config_hash"] = rep.config_hash;
  j["total_jumps"] = rep.arc.jump_count();
  j["final_time"] = rep.arc.final_time();
  j["final_error_norm"] = rep.final_error;
  j["ultimate_bound"] = rep.ultimate_bound;
  j["max_sampled_noise"] = rep.max_sampled_noise;
  j["noise_within_bounds"] = rep.noise_within_bounds;
  json nodes = json::array();
  for (std::size_t i = 0; i < rep.stats.size(); ++i) {
    const auto& s = rep.stats[i];
    json n;
    n["node"] = i + 1;
    n["tau_miet"] = rep.tau_miet[i];
    n["events"] = s.events;
    n["intervals"] = s.intervals;
    if (s.intervals > 0) {
      n["min_iet"] = s.min;
      n["mean_iet"] = s.mean;
      n["max_iet"] = s.max;
    } else {
      n["min_iet"] = nullptr;
      n["mean_iet"] = nullptr;
      n["max_iet"] = nullptr;
    }
    nodes.push_back(n);
  }
  j["nodes"] = nodes;
  json ly;
  ly["monitored"] = rep.monitor.has_value();
  if (rep.monitor) {
    ly["jump_checks"] = rep.monitor->jumps.size();
    ly["violations"] = rep.monitor->jump_violations;
    ly["jump_tolerance"] = rep.monitor->jump_tolerance;
    ly["max_jump_decrement"] = rep.monitor->jumps.empty() ? json(nullptr) : json(rep.monitor->max_jump_decrement);
    ly["flow_increases"] = rep.monitor->flow_increases;
    ly["max_flow_increase"] = rep.monitor->max_flow_increase;
  } else {
    ly["violations"] = 0;
  }
  if (rep.lmi_report) {
    ly["lmi_max_eigenvalue"] = rep.lmi_report->max_eigenvalue;
    ly["lmi_tolerance"] = rep.lmi_report->tolerance;
    ly["lmi_feasible"] = rep.lmi_report->feasible;
  }
  j["lyapunov"] = ly;
  j["config"] = json::parse(rep.config_echo.empty() ? "{}" : rep.config_echo);
  return j.dump(2);
}

void write_outputs(const SimulationReport& rep, const ScenarioConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir: cannot create '" + dir + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw ConfigError(std::string("output_dir: cannot write ") + name);
    f << std::setprecision(17);
    return f;
  };

  {
    auto f = open("events.csv");
    f << "node,time,jump_index,inter_event_time\n";
    for (const auto& ev : rep.arc.events)
      f << ev.node + 1 << ',' << ev.time << ',' << ev.jump_index << ',' << ev.inter_event_time << '\n';
  }
  {
    auto f = open("trace.csv");
    const int n = config.plant.n, q = config.observer.q, m = config.plant.output_dim();
    const int N = config.plant.node_count();
    f << "t,j,e_norm";
    for (int k = 0; k < n; ++k) f << ",x" << k + 1;
    for (int k = 0; k < q; ++k) f << ",z" << k + 1;
    for (int k = 0; k < m; ++k) f << ",yhat" << k + 1;
    for (int k = 0; k < m; ++k) f << ",what" << k + 1;
    for (int k = 0; k < N; ++k) f << ",tau" << k + 1;
    for (int k = 0; k < N; ++k) f << ",eta" << k + 1;
    f << '\n';
    for (std::size_t r = 0; r < rep.arc.samples.size(); ++r) {
      const auto& [tp, s] = rep.arc.samples[r];
      f << tp.t << ',' << tp.j << ',' << rep.error_norm[r];
      for (const Vector* v : {&s.x, &s.z, &s.yhat, &s.what, &s.tau, &s.eta})
        for (Eigen::Index k = 0; k < v->size(); ++k) f << ',' << (*v)[k];
      f << '\n';
    }
  }
  {
    auto f = open("summary.json");
    f << summary_json(rep) << '\n';
  }
}

std::vector<std::pair<double, double>> iss_sweep(const ScenarioConfig& base,
                                                 const std::vector<double>& amplitudes) {
  if (amplitudes.empty() || amplitudes.front() != 0.0)
    throw ConfigError("amplitudes: first entry must be 0");
  for (std::size_t k = 1; k < amplitudes.size(); ++k)
    if (!(amplitudes[k] > amplitudes[k - 1])) throw ConfigError("amplitudes: must be strictly ascending");

  std::vector<std::future<double>> runs;
  for (double a : amplitudes) {
    ScenarioConfig cfg = base;
    cfg.monitor = false;
    cfg.noise.amplitude.assign(cfg.noise.amplitude.size(), a);
    for (auto& p : cfg.nodes)
      if (p.reset == ResetPolicy::noise_aware) p.w_bar = a;
    runs.push_back(std::async(std::launch::async, [cfg = std::move(cfg)] {
      return run_scenario(cfg).ultimate_bound;
    }));
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k < runs.size(); ++k) out.emplace_back(amplitudes[k], runs[k].get());
  return out;
}

}  // namespace etse
