/* Damped pendulum with angle and rate sensors, observed by a copy of the
 * model with output injection. Parameters: {"a": <gravity term>, "b": <damping>}. */
#include "etse/etse_plugin.h"

#include <math.h>
#include <stdlib.h>
#include <string.h>

typedef struct {
  double a, b;
  double gain[2][2]; /* output injection */
} pendulum;

static double read_param(const char *json, const char *key, double fallback) {
  char pattern[16];
  const char *p;
  pattern[0] = '"';
  strcpy(pattern + 1, key);
  strcat(pattern, "\"");
  p = strstr(json, pattern);
  if (!p) return fallback;
  p = strchr(p, ':');
  return p ? strtod(p + 1, NULL) : fallback;
}

static void drift(const pendulum *m, const double *x, double *dx) {
  dx[0] = x[1];
  dx[1] = -m->a * sin(x[0]) - m->b * x[1];
}

static int plant_rate(void *ctx, const double *x, const double *v, double *dxdt) {
  (void)v;
  drift((const pendulum *)ctx, x, dxdt);
  return 0;
}

static int plant_output(void *ctx, int node, const double *x, double *y) {
  (void)ctx;
  y[0] = x[node];
  return 0;
}

static int observer_rate(void *ctx, const double *z, const double *yhat, double *dz) {
  const pendulum *m = (const pendulum *)ctx;
  int r;
  drift(m, z, dz);
  for (r = 0; r < 2; ++r) dz[r] += m->gain[r][0] * (z[0] - yhat[0]) + m->gain[r][1] * (z[1] - yhat[1]);
  return 0;
}

static int observer_estimate(void *ctx, const double *z, double *chi) {
  (void)ctx;
  chi[0] = z[0];
  chi[1] = z[1];
  return 0;
}

static void destroy(void *ctx) { free(ctx); }

int etse_plugin_create(const char *params_json, etse_plugin_model *out) {
  pendulum *m = (pendulum *)calloc(1, sizeof *m);
  if (!m) return 1;
  m->a = read_param(params_json, "a", 1.0);
  m->b = read_param(params_json, "b", 0.5);
  if (m->b < 0.0) {
    free(m);
    return 1;
  }
  m->gain[0][0] = -4.0;
  m->gain[1][1] = -4.0;
  memset(out, 0, sizeof *out);
  out->abi_version = ETSE_PLUGIN_ABI_VERSION;
  out->n = 2;
  out->p = 0;
  out->q = 2;
  out->node_count = 2;
  out->output_dims[0] = 1;
  out->output_dims[1] = 1;
  out->ctx = m;
  out->plant_rate = plant_rate;
  out->plant_output = plant_output;
  out->observer_rate = observer_rate;
  out->observer_estimate = observer_estimate;
  out->destroy = destroy;
  return 0;
}
