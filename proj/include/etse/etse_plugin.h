/*
 * Plugin ABI for user-supplied nonlinear plant/observer models.
 *
 * A plugin is a shared library exporting
 *
 *     int etse_plugin_create(const char *params_json, etse_plugin_model *out);
 *
 * which fills `out` and returns 0 on success. Callbacks return 0 on success;
 * any other value aborts the simulation with a model fault. Jacobian callbacks
 * are optional (NULL selects central finite differences). Jacobians are
 * written row-major.
 */
#ifndef ETSE_PLUGIN_H
#define ETSE_PLUGIN_H

#ifdef __cplusplus
extern "C" {
#endif

#define ETSE_PLUGIN_ABI_VERSION 1
#define ETSE_PLUGIN_MAX_NODES 16
#define ETSE_PLUGIN_ENTRY "etse_plugin_create"

typedef struct etse_plugin_model {
  int abi_version;
  int n;          /* plant state dimension */
  int p;          /* disturbance dimension */
  int q;          /* observer state dimension */
  int node_count; /* sensor nodes */
  int output_dims[ETSE_PLUGIN_MAX_NODES];
  void *ctx;

  int (*plant_rate)(void *ctx, const double *x, const double *v, double *dxdt);
  int (*plant_output)(void *ctx, int node, const double *x, double *y);
  int (*plant_output_jacobian)(void *ctx, int node, const double *x, double *jac);
  int (*observer_rate)(void *ctx, const double *z, const double *yhat, double *dzdt);
  int (*observer_estimate)(void *ctx, const double *z, double *chi);
  int (*observer_estimate_jacobian)(void *ctx, const double *z, double *jac);
  void (*destroy)(void *ctx);
} etse_plugin_model;

typedef int (*etse_plugin_create_fn)(const char *params_json, etse_plugin_model *out);

#ifdef __cplusplus
}
#endif

#endif /* ETSE_PLUGIN_H */
