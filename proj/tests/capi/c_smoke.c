/* Compiled as C to keep the public header C-clean. */
#include <harmonica/harmonica.h>
#include <math.h>
#include <stdio.h>

int main(void) {
  hm_model* model = NULL;
  if (hm_model_builtin("f2", 4, NULL, &model) != HM_OK) {
    fprintf(stderr, "%s\n", hm_last_error());
    return 1;
  }
  hm_ball_spec spec;
  hm_ball_spec_init(&spec);
  spec.radius = 0.5;
  hm_projection proj = hm_default_projection(hm_model_output_dim(model));
  const double x[4] = {1, 2, 3, 4};
  hm_gamma_result r;
  hm_status s = hm_gamma_point(model, x, 4, &spec, &proj, NULL, &r);
  hm_model_free(model);
  if (s != HM_OK || fabs(r.gamma - 0.25) > 1e-12 || r.ball_count != 5) return 1;
  if (hm_model_builtin("nope", 4, NULL, &model) != HM_ERR_INVALID_ARGUMENT) return 1;
  puts("ok");
  return 0;
}
