/* Compiles the public header as C and exercises a round trip. */
#include "etse/etse.h"

#include <math.h>
#include <stdio.h>

int main(void) {
  double tau = 0.0;
  etse_scenario *sc = NULL;
  etse_report *rep = NULL;
  size_t n = 0;
  if (etse_miet(1.0, 1.0, 0.5, &tau) != ETSE_OK || fabs(tau - 1.0 / 3.0) > 1e-12) return 1;
  if (etse_scenario_load_json("{\"horizon\": 0.2, \"monitor\": false}", &sc) != ETSE_OK) return 2;
  if (etse_run(sc, &rep) != ETSE_OK) return 3;
  if (etse_report_event_count(rep, &n) != ETSE_OK || n == 0) return 4;
  printf("events: %zu\n", n);
  etse_report_free(rep);
  etse_scenario_free(sc);
  return 0;
}
