#include <math.h>
#include <stdio.h>
#include "theta_wave.h"

#define CHECK(call)                                                   \
  do {                                                                \
    tw_status s_ = (call);                                            \
    if (s_ != TW_STATUS_OK) {                                         \
      char msg_[256];                                                 \
      tw_last_error_message(msg_, sizeof msg_);                       \
      fprintf(stderr, "%s: status %d: %s\n", #call, (int)s_, msg_);   \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  enum { N = 128 };
  tw_grid *g = NULL;
  CHECK(tw_grid_new(N, 40.0, -20.0, &g));
  double x[N], v[N], back[N];
  CHECK(tw_grid_points(g, x, N));
  for (int i = 0; i < N; i++) v[i] = exp(-x[i] * x[i] / 4.0);

  tw_field *u = NULL, *m = NULL, *r = NULL;
  CHECK(tw_field_new(g, v, N, &u));
  CHECK(tw_helmholtz_apply(u, &m));
  CHECK(tw_helmholtz_solve(m, &r));
  CHECK(tw_field_values(r, back, N));
  for (int i = 0; i < N; i++)
    if (fabs(back[i] - v[i]) > 1e-12) return 2;

  tw_sim_config cfg;
  CHECK(tw_sim_config_default(0.5, 0.5, &cfg));
  tw_trajectory *t = NULL;
  CHECK(tw_evolve(u, &cfg, &t));
  tw_blowup b;
  CHECK(tw_trajectory_blowup(t, &b));
  if (b.detected || tw_trajectory_len(t) < 2) return 3;

  if (tw_grid_new(0, 1.0, 0.0, &g) == TW_STATUS_OK) return 4;
  if (tw_field_values(r, back, 1) != TW_STATUS_BUFFER_TOO_SMALL) return 5;

  tw_trajectory_free(t);
  tw_field_free(r);
  tw_field_free(m);
  tw_field_free(u);
  tw_grid_free(g);
  puts("ok");
  return 0;
}
