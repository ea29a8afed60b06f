// Command-line front end. Talks to the engine only through the C API.
#include "etse/etse.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

// Exit codes: 0 ok, 2 config, 3 simulation fault, 4 assertion failure.
int exit_code(etse_status s) {
  switch (s) {
    case ETSE_OK: return 0;
    case ETSE_ERR_CONFIG:
    case ETSE_ERR_ARGUMENT: return 2;
    case ETSE_ERR_ASSERTION: return 4;
    default: return 3;
  }
}

int report_failure(etse_status s, const char* stage) {
  std::cerr << "etse: " << stage << ": " << etse_last_error() << '\n';
  return exit_code(s);
}

using ScenarioPtr = std::unique_ptr<etse_scenario, decltype(&etse_scenario_free)>;
using ReportPtr = std::unique_ptr<etse_report, decltype(&etse_report_free)>;

int load(const std::string& path, ScenarioPtr& out) {
  etse_scenario* raw = nullptr;
  const etse_status s = etse_scenario_load_file(path.c_str(), &raw);
  if (s != ETSE_OK) return report_failure(s, "config");
  out.reset(raw);
  return 0;
}

int cmd_simulate(const std::string& config, std::string out_dir) {
  ScenarioPtr sc(nullptr, etse_scenario_free);
  if (int rc = load(config, sc)) return rc;
  if (out_dir.empty()) out_dir = etse_scenario_output_dir(sc.get());
  if (out_dir.empty()) {
    std::cerr << "etse: config: no output directory (pass --out or set output_dir)\n";
    return 2;
  }
  etse_report* raw = nullptr;
  etse_status s = etse_run(sc.get(), &raw);
  if (s != ETSE_OK) return report_failure(s, "simulate");
  ReportPtr rep(raw, etse_report_free);
  s = etse_report_write(rep.get(), out_dir.c_str());
  if (s != ETSE_OK) return report_failure(s, "write");

  int nodes = 0;
  etse_scenario_node_count(sc.get(), &nodes);
  for (int i = 1; i <= nodes; ++i) {
    etse_iet_stats st{};
    double tau = 0.0;
    etse_report_iet_stats(rep.get(), i, &st);
    etse_scenario_tau_miet(sc.get(), i, &tau);
    std::printf("node %d: %zu events, IET min %.6g mean %.6g max %.6g (tau_MIET %.6g)\n", i, st.events,
                st.min, st.mean, st.max, tau);
  }
  double final_error = 0.0, bound = 0.0;
  etse_report_error_norm(rep.get(), &final_error, &bound);
  int monitored = 0;
  size_t violations = 0, checks = 0;
  etse_report_lyapunov(rep.get(), &monitored, &violations, &checks);
  std::printf("|e(T)| = %.6g, ultimate bound %.6g\n", final_error, bound);
  if (monitored) std::printf("Lyapunov jump checks: %zu, violations: %zu\n", checks, violations);
  std::printf("outputs written to %s\n", out_dir.c_str());
  return violations > 0 ? 4 : 0;
}

int cmd_miet(double L, double gamma, double lambda) {
  double closed = 0.0, oracle = 0.0;
  etse_status s = etse_miet(L, gamma, lambda, &closed);
  if (s != ETSE_OK) return report_failure(s, "miet");
  s = etse_miet_oracle(L, gamma, lambda, 1e-12, &oracle);
  if (s != ETSE_OK) return report_failure(s, "miet oracle");
  std::printf("{\n  \"L\": %.17g,\n  \"gamma\": %.17g,\n  \"lambda\": %.17g,\n", L, gamma, lambda);
  std::printf("  \"tau_miet\": %.17g,\n  \"oracle\": %.17g,\n  \"abs_difference\": %.3e\n}\n", closed, oracle,
              std::abs(closed - oracle));
  return 0;
}

int cmd_design(const std::string& config, const std::string& out_path) {
  ScenarioPtr sc(nullptr, etse_scenario_free);
  if (int rc = load(config, sc)) return rc;
  int feasible = 0;
  char* text = nullptr;
  const etse_status s = etse_design_lti(sc.get(), &feasible, &text);
  if (s != ETSE_OK) return report_failure(s, "design-lti");
  std::unique_ptr<char, decltype(&etse_string_free)> owned(text, etse_string_free);
  std::ofstream f(out_path);
  if (!f) {
    std::cerr << "etse: config: cannot write '" << out_path << "'\n";
    return 2;
  }
  f << owned.get() << '\n';
  std::printf("%s P written to %s\n", feasible ? "feasible" : "INFEASIBLE", out_path.c_str());
  return feasible ? 0 : 4;
}

int cmd_sweep(const std::string& config, const std::string& csv) {
  std::vector<double> amps;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      amps.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      std::cerr << "etse: config: --amplitudes: cannot parse '" << item << "'\n";
      return 2;
    }
  }
  ScenarioPtr sc(nullptr, etse_scenario_free);
  if (int rc = load(config, sc)) return rc;
  std::vector<double> bounds(amps.size());
  const etse_status s = etse_sweep(sc.get(), amps.data(), amps.size(), bounds.data());
  if (s != ETSE_OK) return report_failure(s, "sweep");
  std::printf("amplitude,ultimate_bound\n");
  for (std::size_t k = 0; k < amps.size(); ++k) std::printf("%.17g,%.17g\n", amps[k], bounds[k]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered state estimation simulator"};
  app.require_subcommand(1);

  std::string config, out, amplitudes;
  double L = 0.0, gamma = 0.0, lambda = 0.0;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write events.csv, trace.csv, summary.json");
  sim->add_option("--config", config, "Scenario JSON file")->required();
  sim->add_option("--out", out, "Output directory (defaults to the config's output_dir)");

  auto* miet = app.add_subcommand("miet", "Minimum inter-event time: closed form and ODE oracle");
  miet->add_option("--L", L, "Growth bound L >= 0")->required();
  miet->add_option("--gamma", gamma, "Gain gamma > 0")->required();
  miet->add_option("--lambda", lambda, "Tuning parameter in (0,1)")->required();

  auto* design = app.add_subcommand("design-lti", "Solve the LMI for P and write it with its certificate");
  design->add_option("--config", config, "Scenario JSON file with LTI model data")->required();
  design->add_option("--out", out, "Output JSON path")->required();

  auto* sweep = app.add_subcommand("sweep", "Ultimate error bound versus noise amplitude");
  sweep->add_option("--config", config, "Scenario JSON file")->required();
  sweep->add_option("--amplitudes", amplitudes, "Comma-separated ascending list starting at 0")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*sim) return cmd_simulate(config, out);
  if (*miet) return cmd_miet(L, gamma, lambda);
  if (*design) return cmd_design(config, out);
  if (*sweep) return cmd_sweep(config, amplitudes);
  return 2;
}
