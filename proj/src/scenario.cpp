#include "etse/harness.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace etse {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

Vector read_vector(const json& j, const std::string& path) {
  if (j.is_number()) return Vector::Constant(1, read_number(j, path));
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = read_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

/// Row-major nested arrays; a bare number is a 1x1 matrix.
Matrix read_matrix(const json& j, const std::string& path) {
  if (j.is_number()) return Matrix::Constant(1, 1, read_number(j, path));
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of rows");
  if (j.front().is_number()) {
    const Vector row = read_vector(j, path);
    return row.transpose();
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) fail(path, "rows must be nonempty arrays");
  Matrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) fail(rp, "all rows must have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          read_number(j[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return M;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown field");
}

void apply_node_overrides(NodeTriggerParams& p, const json& j, const std::string& path, int output_dim) {
  reject_unknown(j, {"L", "gamma", "lambda", "tau_miet", "sigma", "s", "beta_lo", "beta_hi", "w_bar", "mu",
                     "Q", "mode", "period", "reset", "dwell_floor"},
                 path);
  bool retune = false;
  if (j.contains("L")) { p.growth = read_number(j["L"], path + ".L"); retune = true; }
  if (j.contains("gamma")) { p.gain = read_number(j["gamma"], path + ".gamma"); retune = true; }
  if (j.contains("lambda")) { p.lambda = read_number(j["lambda"], path + ".lambda"); retune = true; }
  if (j.contains("tau_miet")) {
    p.tau_miet = read_number(j["tau_miet"], path + ".tau_miet");
  } else if (retune || p.tau_miet <= 0.0) {
    if (!(p.gain > 0.0) || !(p.lambda > 0.0 && p.lambda < 1.0) || !(p.growth >= 0.0))
      fail(path, "need L >= 0, gamma > 0 and lambda in (0,1) to derive tau_miet");
    try {
      p.tau_miet = compute_miet(p.growth, p.gain, p.lambda);
    } catch (const NumericalFailure& e) {
      fail(path + ".tau_miet", e.what());
    }
  }
  if (j.contains("sigma")) p.sigma = read_number(j["sigma"], path + ".sigma");
  if (j.contains("s")) p.space_reg = read_number(j["s"], path + ".s");
  if (j.contains("beta_lo")) p.beta_lo = read_number(j["beta_lo"], path + ".beta_lo");
  if (j.contains("beta_hi")) p.beta_hi = read_number(j["beta_hi"], path + ".beta_hi");
  if (j.contains("w_bar")) p.w_bar = read_number(j["w_bar"], path + ".w_bar");
  if (j.contains("mu")) p.mu = read_number(j["mu"], path + ".mu");
  if (j.contains("Q")) p.output_weight = read_matrix(j["Q"], path + ".Q");
  if (p.output_weight.size() == 0) p.output_weight = Matrix::Identity(output_dim, output_dim);
  if (j.contains("dwell_floor")) p.dwell_floor = read_number(j["dwell_floor"], path + ".dwell_floor");
  if (j.contains("mode")) {
    const auto& m = j["mode"];
    if (!m.is_string()) fail(path + ".mode", "expected a string");
    const std::string s = m.get<std::string>();
    if (s == "event_triggered") p.mode = TriggerMode::event_triggered;
    else if (s == "time_triggered") p.mode = TriggerMode::time_triggered;
    else if (s == "periodic") p.mode = TriggerMode::periodic;
    else fail(path + ".mode", "expected event_triggered, time_triggered or periodic");
  }
  if (j.contains("period")) p.period = read_number(j["period"], path + ".period");
  if (p.mode == TriggerMode::periodic && !j.contains("period") && p.period <= 0.0)
    fail(path + ".period", "required for periodic mode");
  if (j.contains("reset")) {
    const auto& r = j["reset"];
    if (!r.is_string()) fail(path + ".reset", "expected a string");
    const std::string s = r.get<std::string>();
    if (s == "zero") p.reset = ResetPolicy::zero;
    else if (s == "noise_aware") p.reset = ResetPolicy::noise_aware;
    else fail(path + ".reset", "expected zero or noise_aware");
  }
  validate(p, output_dim, path);
}

IntegratorTolerances read_tolerances(const json& j) {
  reject_unknown(j, {"rel", "abs", "event_time", "guard_value", "min_step", "max_step"}, "tolerances");
  IntegratorTolerances tol;
  if (j.contains("rel")) tol.rel = read_number(j["rel"], "tolerances.rel");
  if (j.contains("abs")) tol.abs = read_number(j["abs"], "tolerances.abs");
  if (j.contains("event_time")) tol.event_time = read_number(j["event_time"], "tolerances.event_time");
  if (j.contains("guard_value")) tol.guard_value = read_number(j["guard_value"], "tolerances.guard_value");
  if (j.contains("min_step")) tol.min_step = read_number(j["min_step"], "tolerances.min_step");
  if (j.contains("max_step")) tol.max_step = read_number(j["max_step"], "tolerances.max_step");
  if (!(tol.rel > 0.0) || !(tol.abs > 0.0) || !(tol.event_time > 0.0) || !(tol.guard_value > 0.0))
    fail("tolerances", "all tolerances must be > 0");
  return tol;
}

}  // namespace

ClosedLoop ScenarioConfig::closed_loop() const {
  ClosedLoop loop;
  loop.plant = plant;
  loop.observer = observer;
  loop.nodes = nodes;
  loop.redundant_observers = redundant_observers;
  loop.inputs = std::make_shared<ScenarioInputs>(noise, disturbance);
  return loop;
}

HybridState ScenarioConfig::initial_state(const ClosedLoop& loop) const {
  return make_initial_state(loop, x0, z0, yhat0, what0, tau0, eta0);
}

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(root, {"description", "model", "nodes", "initial", "horizon", "tolerances", "noise",
                        "disturbance", "redundant_observers", "trace_interval", "lmi", "monitor",
                        "output_dir"},
                 "");

  ScenarioConfig cfg;
  cfg.source = root.dump();

  // Model.
  const json model = root.value("model", json{{"type", "case_study"}});
  if (!model.is_object() || !model.contains("type") || !model["type"].is_string())
    fail("model.type", "required string");
  const std::string type = model["type"].get<std::string>();
  std::vector<Matrix> C;
  Matrix A, gain;
  std::vector<NodeTriggerParams> defaults;
  double rho_v = 0.0, theta = 0.0;
  if (type == "case_study") {
    reject_unknown(model, {"type"}, "model");
    cfg.model_kind = ModelKind::case_study;
    const CaseStudyDesign d = case_study_model();
    cfg.plant = d.plant;
    cfg.observer = d.observer;
    defaults = d.nodes;
    A = d.matrices.A;
    C = {d.matrices.C1, d.matrices.C2};
    gain = d.matrices.gain;
    rho_v = d.lmi.rho_v;
    theta = d.lmi.theta;
  } else if (type == "lti") {
    reject_unknown(model, {"type", "A", "C", "L", "disturbance_dim"}, "model");
    cfg.model_kind = ModelKind::lti;
    if (!model.contains("A") || !model.contains("C") || !model.contains("L"))
      fail("model", "lti models need A, C (list of per-node matrices) and L");
    A = read_matrix(model["A"], "model.A");
    if (!model["C"].is_array() || model["C"].empty()) fail("model.C", "expected a list of per-node matrices");
    for (std::size_t i = 0; i < model["C"].size(); ++i)
      C.push_back(read_matrix(model["C"][i], "model.C[" + std::to_string(i) + "]"));
    gain = read_matrix(model["L"], "model.L");
    const int pdim = model.contains("disturbance_dim")
                         ? static_cast<int>(read_number(model["disturbance_dim"], "model.disturbance_dim"))
                         : 0;
    cfg.plant = make_lti_plant(A, C, pdim);
    cfg.observer = make_luenberger_observer(A, stack_outputs(C), gain);
    defaults.assign(C.size(), NodeTriggerParams{});
  } else if (type == "plugin") {
    reject_unknown(model, {"type", "path", "params"}, "model");
    cfg.model_kind = ModelKind::plugin;
    if (!model.contains("path") || !model["path"].is_string()) fail("model.path", "required string");
    const std::string params = model.contains("params") ? model["params"].dump() : "{}";
    load_plugin_model(model["path"].get<std::string>(), params, cfg.plant, cfg.observer);
    defaults.assign(cfg.plant.output_dims.size(), NodeTriggerParams{});
  } else {
    fail("model.type", "expected case_study, lti or plugin");
  }
  cfg.plant.validate();
  const int N = cfg.plant.node_count();
  const int m = cfg.plant.output_dim();

  // Nodes.
  const json nodes = root.value("nodes", json::array());
  if (!nodes.is_array()) fail("nodes", "expected an array");
  if (!nodes.empty() && static_cast<int>(nodes.size()) != N)
    fail("nodes", "expected " + std::to_string(N) + " entries (one per sensor node)");
  if (nodes.empty() && cfg.model_kind != ModelKind::case_study)
    fail("nodes", "trigger parameters are required for this model type");
  cfg.nodes = defaults;
  for (int i = 0; i < N; ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    apply_node_overrides(cfg.nodes[i], nodes.empty() ? json::object() : nodes[i], path,
                         cfg.plant.output_dims[i]);
  }

  // Horizon, tolerances, sampling.
  if (root.contains("horizon")) cfg.horizon = read_number(root["horizon"], "horizon");
  if (!(cfg.horizon > 0.0)) fail("horizon", "must be > 0");
  if (root.contains("tolerances")) cfg.sim.tol = read_tolerances(root["tolerances"]);
  cfg.sim.sample_interval = 1e-3;
  if (root.contains("trace_interval")) cfg.sim.sample_interval = read_number(root["trace_interval"], "trace_interval");
  if (cfg.sim.sample_interval < 0.0) fail("trace_interval", "must be >= 0");
  if (root.contains("redundant_observers")) {
    if (!root["redundant_observers"].is_boolean()) fail("redundant_observers", "expected a boolean");
    cfg.redundant_observers = root["redundant_observers"].get<bool>();
  }
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }

  // Noise.
  cfg.noise.dims = cfg.plant.output_dims;
  cfg.noise.amplitude.assign(N, 0.0);
  if (root.contains("noise")) {
    const json& nz = root["noise"];
    reject_unknown(nz, {"amplitude", "dwell", "seed"}, "noise");
    if (nz.contains("amplitude")) {
      const Vector a = read_vector(nz["amplitude"], "noise.amplitude");
      if (a.size() == 1) cfg.noise.amplitude.assign(N, a[0]);
      else if (a.size() == N) cfg.noise.amplitude.assign(a.data(), a.data() + N);
      else fail("noise.amplitude", "expected a scalar or one entry per node");
      for (double v : cfg.noise.amplitude)
        if (v < 0.0) fail("noise.amplitude", "must be >= 0");
    }
    if (nz.contains("dwell")) cfg.noise.dwell = read_number(nz["dwell"], "noise.dwell");
    if (!(cfg.noise.dwell > 0.0)) fail("noise.dwell", "must be > 0");
    if (nz.contains("seed")) {
      if (!nz["seed"].is_number_integer()) fail("noise.seed", "expected an integer");
      cfg.noise.seed = nz["seed"].is_number_unsigned() ? nz["seed"].get<std::uint64_t>()
                                                       : static_cast<std::uint64_t>(nz["seed"].get<std::int64_t>());
    }
  }

  // Disturbance.
  cfg.disturbance.dim = cfg.plant.p;
  if (root.contains("disturbance")) {
    const json& dj = root["disturbance"];
    reject_unknown(dj, {"type", "times", "values"}, "disturbance");
    const std::string dtype = dj.value("type", "zero");
    if (dtype == "piecewise_constant") {
      if (cfg.plant.p == 0) fail("disturbance", "model has no disturbance input");
      const Vector times = read_vector(dj.value("times", json::array()), "disturbance.times");
      if (!dj.contains("values") || !dj["values"].is_array() ||
          dj["values"].size() != static_cast<std::size_t>(times.size()))
        fail("disturbance.values", "expected one vector per time");
      for (Eigen::Index k = 0; k < times.size(); ++k) {
        if (k > 0 && !(times[k] > times[k - 1])) fail("disturbance.times", "must be strictly increasing");
        const Vector v = read_vector(dj["values"][static_cast<std::size_t>(k)],
                                     "disturbance.values[" + std::to_string(k) + "]");
        if (v.size() != cfg.plant.p) fail("disturbance.values", "vector length must equal the disturbance dimension");
        cfg.disturbance.times.push_back(times[k]);
        cfg.disturbance.values.push_back(v);
      }
    } else if (dtype != "zero") {
      fail("disturbance.type", "expected zero or piecewise_constant");
    }
  }

  // Initial state (single shared observer state and output estimate).
  const json init = root.value("initial", json::object());
  reject_unknown(init, {"x0", "z0", "yhat0", "what0", "tau0", "eta0"}, "initial");
  if (init.contains("x0")) {
    cfg.x0 = read_vector(init["x0"], "initial.x0");
  } else if (cfg.model_kind == ModelKind::case_study) {
    cfg.x0 = Vector::Unit(cfg.plant.n, 0);
  } else {
    fail("initial.x0", "required for this model type");
  }
  cfg.z0 = init.contains("z0") ? read_vector(init["z0"], "initial.z0") : Vector::Zero(cfg.observer.q);
  cfg.yhat0 = init.contains("yhat0") ? read_vector(init["yhat0"], "initial.yhat0") : Vector::Zero(m);
  cfg.what0 = init.contains("what0") ? read_vector(init["what0"], "initial.what0") : Vector::Zero(m);
  if (init.contains("tau0")) {
    cfg.tau0 = read_vector(init["tau0"], "initial.tau0");
  } else {
    // Each node's first transmission happens at t = 0.
    cfg.tau0.resize(N);
    for (int i = 0; i < N; ++i)
      cfg.tau0[i] = cfg.nodes[i].mode == TriggerMode::periodic ? cfg.nodes[i].period : cfg.nodes[i].tau_miet;
  }
  cfg.eta0 = init.contains("eta0") ? read_vector(init["eta0"], "initial.eta0") : Vector::Zero(N);

  // LMI design data (LTI models only).
  if (root.contains("monitor")) {
    if (!root["monitor"].is_boolean()) fail("monitor", "expected a boolean");
    cfg.monitor = root["monitor"].get<bool>();
  }
  const bool has_lmi_section = root.contains("lmi");
  if (has_lmi_section && cfg.model_kind == ModelKind::plugin)
    fail("lmi", "LMI design is only available for LTI models");
  if (cfg.model_kind == ModelKind::case_study || has_lmi_section) {
    const json lj = root.value("lmi", json::object());
    reject_unknown(lj, {"rho_V", "theta", "P"}, "lmi");
    if (lj.contains("rho_V")) rho_v = read_number(lj["rho_V"], "lmi.rho_V");
    if (lj.contains("theta")) theta = read_number(lj["theta"], "lmi.theta");
    if (cfg.model_kind == ModelKind::lti && (!lj.contains("rho_V") || !lj.contains("theta")))
      fail("lmi", "rho_V and theta are required");
    cfg.lmi = make_lmi_problem(A, C, gain, cfg.nodes, rho_v, theta);
    cfg.lmi->validate();
    if (lj.contains("P")) {
      const Matrix P = read_matrix(lj["P"], "lmi.P");
      if (P.rows() != cfg.plant.n || P.cols() != cfg.plant.n) fail("lmi.P", "must be n x n");
      if ((P - P.transpose()).norm() > 1e-12 * (1.0 + P.norm())) fail("lmi.P", "must be symmetric");
      cfg.P = P;
    }
  }

  // Synchronization of all observer copies is structural (one z0, one yhat0);
  // dimension checks happen here so errors carry field names.
  cfg.closed_loop().validate();
  (void)cfg.initial_state(cfg.closed_loop());
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace etse
