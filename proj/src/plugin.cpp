#include "etse/etse_plugin.h"
#include "etse/harness.hpp"

#include <dlfcn.h>

#include <memory>
#include <string>

namespace etse {
namespace {

struct PluginHandle {
  void* library = nullptr;
  etse_plugin_model model{};

  ~PluginHandle() {
    if (model.destroy) model.destroy(model.ctx);
    if (library) dlclose(library);
  }
};

void check(int rc, const char* what) {
  if (rc != 0) throw SimulationFault(std::string("plugin callback ") + what + " failed (code " +
                                     std::to_string(rc) + ")");
}

Matrix row_major(const std::vector<double>& buf, int rows, int cols) {
  Matrix J(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) J(r, c) = buf[static_cast<std::size_t>(r * cols + c)];
  return J;
}

}  // namespace

void load_plugin_model(const std::string& path, const std::string& params_json, PlantModel& plant,
                       ObserverModel& observer) {
  auto handle = std::make_shared<PluginHandle>();
  handle->library = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle->library) {
    const char* err = dlerror();
    throw ConfigError("model.path: cannot load plugin '" + path + "': " + (err ? err : "unknown"));
  }
  auto* entry = reinterpret_cast<etse_plugin_create_fn>(dlsym(handle->library, ETSE_PLUGIN_ENTRY));
  if (!entry) throw ConfigError("model.path: plugin does not export " ETSE_PLUGIN_ENTRY);
  if (entry(params_json.c_str(), &handle->model) != 0)
    throw ConfigError("model.params: plugin rejected its parameters");

  const etse_plugin_model& m = handle->model;
  if (m.abi_version != ETSE_PLUGIN_ABI_VERSION) throw ConfigError("model.path: plugin ABI version mismatch");
  if (m.n <= 0 || m.q <= 0 || m.p < 0 || m.node_count <= 0 || m.node_count > ETSE_PLUGIN_MAX_NODES)
    throw ConfigError("model.path: plugin reported invalid dimensions");
  if (!m.plant_rate || !m.plant_output || !m.observer_rate || !m.observer_estimate)
    throw ConfigError("model.path: plugin is missing required callbacks");

  const int n = m.n, q = m.q;
  plant = PlantModel{};
  plant.n = n;
  plant.p = m.p;
  plant.dynamics = [handle, n](const Vector& x, const Vector& v) -> Vector {
    Vector dx(n);
    check(handle->model.plant_rate(handle->model.ctx, x.data(), v.data(), dx.data()), "plant_rate");
    return dx;
  };
  for (int i = 0; i < m.node_count; ++i) {
    const int mi = m.output_dims[i];
    if (mi <= 0) throw ConfigError("model.path: plugin output dimension must be positive");
    plant.output_dims.push_back(mi);
    plant.outputs.push_back([handle, i, mi](const Vector& x) -> Vector {
      Vector y(mi);
      check(handle->model.plant_output(handle->model.ctx, i, x.data(), y.data()), "plant_output");
      return y;
    });
    if (m.plant_output_jacobian) {
      plant.output_jacobians.push_back([handle, i, mi, n](const Vector& x) -> Matrix {
        std::vector<double> buf(static_cast<std::size_t>(mi * n));
        check(handle->model.plant_output_jacobian(handle->model.ctx, i, x.data(), buf.data()),
              "plant_output_jacobian");
        return row_major(buf, mi, n);
      });
    } else {
      plant.output_jacobians.emplace_back();
    }
  }

  observer = ObserverModel{};
  observer.q = q;
  observer.dynamics = [handle, q](const Vector& z, const Vector& yhat) -> Vector {
    Vector dz(q);
    check(handle->model.observer_rate(handle->model.ctx, z.data(), yhat.data(), dz.data()),
          "observer_rate");
    return dz;
  };
  observer.estimate = [handle, n](const Vector& z) -> Vector {
    Vector chi(n);
    check(handle->model.observer_estimate(handle->model.ctx, z.data(), chi.data()), "observer_estimate");
    return chi;
  };
  if (m.observer_estimate_jacobian) {
    observer.estimate_jacobian = [handle, n, q](const Vector& z) -> Matrix {
      std::vector<double> buf(static_cast<std::size_t>(n * q));
      check(handle->model.observer_estimate_jacobian(handle->model.ctx, z.data(), buf.data()),
            "observer_estimate_jacobian");
      return row_major(buf, n, q);
    };
  }
}

}  // namespace etse
