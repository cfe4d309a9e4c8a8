#include <math.h>
#include <stdio.h>
#include <string.h>

#include "latentfactor.h"

#define CHECK(call)                                                            \
  do {                                                                         \
    LfStatus s_ = (call);                                                      \
    if (s_ != LF_STATUS_OK) {                                                  \
      fprintf(stderr, "%s failed with %d: %s\n", #call, (int)s_,               \
              lf_last_error_message());                                        \
      return 1;                                                                \
    }                                                                          \
  } while (0)

int main(int argc, char **argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: smoke <scratch-file>\n");
    return 2;
  }
  const size_t dims[5] = {12, 3, 6, 5, 2};
  LfDataset *ds = NULL;
  LfModel *model = NULL;
  CHECK(lf_dataset_synthetic(dims, 3, 0.05, &ds));
  CHECK(lf_model_fit(ds, &model));

  const size_t cell[4] = {1, 2, 3, 0};
  double w[12], recon[12];
  CHECK(lf_dataset_latent(ds, cell, w, 12));

  LfRecoveryConfig cfg;
  LfRecoveryResult res;
  CHECK(lf_recovery_config_default(&cfg));
  CHECK(lf_recover(model, w, 12, LF_PARAM_FORM_FULL_RANK, &cfg, recon, 12, &res));
  if (!(res.final_loss < 1e-12)) {
    fprintf(stderr, "full-rank loss %g\n", res.final_loss);
    return 1;
  }

  size_t n = 0;
  CHECK(lf_model_direction_count(model, &n));
  if (n != 7) {
    fprintf(stderr, "expected 7 directions, got %zu\n", n);
    return 1;
  }
  LfDirection *yaw = NULL, *loaded = NULL;
  CHECK(lf_model_direction(model, 6, &yaw));
  if (strcmp(lf_direction_name(yaw), "yaw") != 0) {
    fprintf(stderr, "unexpected name %s\n", lf_direction_name(yaw));
    return 1;
  }
  CHECK(lf_direction_write(yaw, argv[1]));
  CHECK(lf_direction_read(argv[1], &loaded));

  double a[12], b[12];
  CHECK(lf_edit(yaw, w, 12, -1.25, a, 12));
  CHECK(lf_edit(loaded, w, 12, -1.25, b, 12));
  if (memcmp(a, b, sizeof a) != 0) {
    fprintf(stderr, "file-loaded direction differs\n");
    return 1;
  }

  double tiny[2];
  if (lf_edit(yaw, w, 12, 1.0, tiny, 2) != LF_STATUS_BUFFER_TOO_SMALL) {
    fprintf(stderr, "short buffer accepted\n");
    return 1;
  }
  if (lf_model_read("/nonexistent.ltc", &model) != LF_STATUS_FILE ||
      lf_last_error_message() == NULL) {
    fprintf(stderr, "missing file not reported\n");
    return 1;
  }

  lf_direction_free(loaded);
  lf_direction_free(yaw);
  lf_model_free(model);
  lf_dataset_free(ds);
  printf("ok %s\n", lf_version());
  return 0;
}
