#include "etse/etse.h"

#include "etse/harness.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <memory>
#include <new>
#include <string>

struct etse_scenario {
  etse::ScenarioConfig config;
};

struct etse_report {
  etse::SimulationReport report;
  etse::ScenarioConfig config;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
etse_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return ETSE_OK;
  } catch (const etse::ConfigError& e) {
    g_last_error = e.what();
    return ETSE_ERR_CONFIG;
  } catch (const etse::SimulationFault& e) {
    g_last_error = e.what();
    return ETSE_ERR_SIMULATION;
  } catch (const etse::AssertionFailure& e) {
    g_last_error = e.what();
    return ETSE_ERR_ASSERTION;
  } catch (const etse::NumericalFailure& e) {
    g_last_error = e.what();
    return ETSE_ERR_NUMERICAL;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return ETSE_ERR_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ETSE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ETSE_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json matrix_json(const etse::Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

extern "C" {

const char* etse_last_error(void) { return g_last_error.c_str(); }

const char* etse_version(void) { return "1.0.0"; }

etse_status etse_miet(double L, double gamma, double lambda, double* out) {
  return guarded([&] {
    require(out != nullptr, "etse_miet: out is null");
    require(L >= 0.0 && gamma > 0.0 && lambda > 0.0 && lambda < 1.0,
            "etse_miet: need L >= 0, gamma > 0, 0 < lambda < 1");
    *out = etse::compute_miet(L, gamma, lambda);
  });
}

etse_status etse_miet_oracle(double L, double gamma, double lambda, double tol, double* out) {
  return guarded([&] {
    require(out != nullptr, "etse_miet_oracle: out is null");
    require(L >= 0.0 && gamma > 0.0 && lambda > 0.0 && lambda < 1.0 && tol > 0.0,
            "etse_miet_oracle: need L >= 0, gamma > 0, 0 < lambda < 1, tol > 0");
    *out = etse::phi_ode_oracle(L, gamma, lambda, tol);
  });
}

etse_status etse_scenario_load_file(const char* path, etse_scenario** out) {
  return guarded([&] {
    require(path && out, "etse_scenario_load_file: null argument");
    *out = nullptr;
    auto s = std::make_unique<etse_scenario>();
    s->config = etse::load_config(path);
    *out = s.release();
  });
}

etse_status etse_scenario_load_json(const char* json_text, etse_scenario** out) {
  return guarded([&] {
    require(json_text && out, "etse_scenario_load_json: null argument");
    *out = nullptr;
    auto s = std::make_unique<etse_scenario>();
    s->config = etse::parse_config(json_text);
    *out = s.release();
  });
}

void etse_scenario_free(etse_scenario* scenario) { delete scenario; }

etse_status etse_scenario_node_count(const etse_scenario* scenario, int* out) {
  return guarded([&] {
    require(scenario && out, "etse_scenario_node_count: null argument");
    *out = scenario->config.plant.node_count();
  });
}

etse_status etse_scenario_tau_miet(const etse_scenario* scenario, int node, double* out) {
  return guarded([&] {
    require(scenario && out, "etse_scenario_tau_miet: null argument");
    require(node >= 1 && node <= scenario->config.plant.node_count(), "etse_scenario_tau_miet: node out of range");
    *out = scenario->config.nodes[static_cast<std::size_t>(node - 1)].tau_miet;
  });
}

const char* etse_scenario_output_dir(const etse_scenario* scenario) {
  return scenario ? scenario->config.output_dir.c_str() : "";
}

etse_status etse_scenario_set_noise_amplitude(etse_scenario* scenario, double amplitude) {
  return guarded([&] {
    require(scenario != nullptr, "etse_scenario_set_noise_amplitude: null scenario");
    require(amplitude >= 0.0, "etse_scenario_set_noise_amplitude: amplitude must be >= 0");
    auto& cfg = scenario->config;
    cfg.noise.amplitude.assign(cfg.noise.amplitude.size(), amplitude);
    for (auto& p : cfg.nodes)
      if (p.reset == etse::ResetPolicy::noise_aware) p.w_bar = amplitude;
  });
}

etse_status etse_run(const etse_scenario* scenario, etse_report** out) {
  return guarded([&] {
    require(scenario && out, "etse_run: null argument");
    *out = nullptr;
    auto r = std::make_unique<etse_report>();
    r->config = scenario->config;
    r->report = etse::run_scenario(r->config);
    r->summary = etse::summary_json(r->report);
    *out = r.release();
  });
}

void etse_report_free(etse_report* report) { delete report; }

etse_status etse_report_write(const etse_report* report, const char* dir) {
  return guarded([&] {
    require(report && dir, "etse_report_write: null argument");
    etse::write_outputs(report->report, report->config, dir);
  });
}

const char* etse_report_summary_json(const etse_report* report) {
  return report ? report->summary.c_str() : "";
}

etse_status etse_report_iet_stats(const etse_report* report, int node, etse_iet_stats* out) {
  return guarded([&] {
    require(report && out, "etse_report_iet_stats: null argument");
    const auto& stats = report->report.stats;
    require(node >= 1 && node <= static_cast<int>(stats.size()), "etse_report_iet_stats: node out of range");
    const auto& s = stats[static_cast<std::size_t>(node - 1)];
    *out = {s.events, s.intervals, s.min, s.mean, s.max};
  });
}

etse_status etse_report_event_count(const etse_report* report, size_t* out) {
  return guarded([&] {
    require(report && out, "etse_report_event_count: null argument");
    *out = report->report.arc.events.size();
  });
}

etse_status etse_report_event(const etse_report* report, size_t index, etse_event* out) {
  return guarded([&] {
    require(report && out, "etse_report_event: null argument");
    const auto& events = report->report.arc.events;
    require(index < events.size(), "etse_report_event: index out of range");
    const auto& ev = events[index];
    *out = {ev.node + 1, ev.time, ev.jump_index, ev.inter_event_time};
  });
}

etse_status etse_report_error_norm(const etse_report* report, double* final_error, double* ultimate_bound) {
  return guarded([&] {
    require(report != nullptr, "etse_report_error_norm: null report");
    if (final_error) *final_error = report->report.final_error;
    if (ultimate_bound) *ultimate_bound = report->report.ultimate_bound;
  });
}

etse_status etse_report_lyapunov(const etse_report* report, int* monitored, size_t* violations,
                                 size_t* jump_checks) {
  return guarded([&] {
    require(report != nullptr, "etse_report_lyapunov: null report");
    const auto& m = report->report.monitor;
    if (monitored) *monitored = m ? 1 : 0;
    if (violations) *violations = m ? m->jump_violations : 0;
    if (jump_checks) *jump_checks = m ? m->jumps.size() : 0;
  });
}

etse_status etse_design_lti(const etse_scenario* scenario, int* feasible, char** json_out) {
  return guarded([&] {
    require(scenario && json_out, "etse_design_lti: null argument");
    *json_out = nullptr;
    const auto& cfg = scenario->config;
    if (!cfg.lmi) throw etse::ConfigError("lmi: scenario has no LMI design data");
    const etse::SolveResult sol = etse::solve_P(*cfg.lmi);
    nlohmann::json j;
    j["feasible"] = sol.feasible;
    j["P"] = matrix_json(sol.P);
    j["restarts_used"] = sol.restarts_used;
    j["iterations"] = sol.iterations;
    j["report"] = {{"max_eigenvalue", sol.report.max_eigenvalue},
                   {"p_min_eigenvalue", sol.report.p_min_eigenvalue},
                   {"tolerance", sol.report.tolerance},
                   {"frobenius_norm", sol.report.frobenius_norm},
                   {"residual_norm", sol.report.residual_norm},
                   {"feasible", sol.report.feasible}};
    j["lmi"] = {{"rho_V", cfg.lmi->rho_v}, {"theta", cfg.lmi->theta}, {"size", cfg.lmi->n() + 3 * cfg.lmi->m()}};
    if (feasible) *feasible = sol.feasible ? 1 : 0;
    *json_out = dup_string(j.dump(2));
  });
}

etse_status etse_verify_lmi(const etse_scenario* scenario, const double* P, int n, int* feasible,
                            double* max_eigenvalue, double* tolerance) {
  return guarded([&] {
    require(scenario && P, "etse_verify_lmi: null argument");
    const auto& cfg = scenario->config;
    if (!cfg.lmi) throw etse::ConfigError("lmi: scenario has no LMI design data");
    require(n == cfg.lmi->n(), "etse_verify_lmi: P has the wrong dimension");
    etse::Matrix M(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) M(r, c) = P[r * n + c];
    const etse::LmiReport rep = etse::verify_lmi(*cfg.lmi, M);
    if (feasible) *feasible = rep.feasible ? 1 : 0;
    if (max_eigenvalue) *max_eigenvalue = rep.max_eigenvalue;
    if (tolerance) *tolerance = rep.tolerance;
  });
}

void etse_string_free(char* text) { delete[] text; }

etse_status etse_sweep(const etse_scenario* scenario, const double* amplitudes, size_t count,
                       double* bounds_out) {
  return guarded([&] {
    require(scenario && amplitudes && bounds_out && count > 0, "etse_sweep: null or empty argument");
    const std::vector<double> amps(amplitudes, amplitudes + count);
    const auto result = etse::iss_sweep(scenario->config, amps);
    for (size_t k = 0; k < count; ++k) bounds_out[k] = result[k].second;
  });
}

}  // extern "C"
