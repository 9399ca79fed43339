#ifndef QOE_NARX_H
#define QOE_NARX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call. Values 2 to 5 match the CLI exit codes.
 */
typedef enum QnStatus {
  QN_STATUS_OK = 0,
  QN_STATUS_NULL_POINTER = 1,
  QN_STATUS_USAGE = 2,
  QN_STATUS_VALIDATION = 3,
  QN_STATUS_NUMERICAL = 4,
  QN_STATUS_IO = 5,
  QN_STATUS_PANIC = 6,
} QnStatus;

typedef enum QnLoopMode {
  /*
   One step ahead, feedback taps from the supplied scores.
   */
  QN_LOOP_MODE_OPEN = 0,
  /*
   Free running after the warm-up.
   */
  QN_LOOP_MODE_CLOSED = 1,
} QnLoopMode;

typedef enum QnFrameMetric {
  QN_FRAME_METRIC_PSNR = 0,
  QN_FRAME_METRIC_SSIM = 1,
  QN_FRAME_METRIC_GMSD = 2,
} QnFrameMetric;

/*
 Opaque trained model.
 */
typedef struct QnModel QnModel;

/*
 Metric values; correlations are NaN when undefined.
 */
typedef struct QnEval {
  double rmse;
  double plcc;
  double srocc;
  double outage_rate;
  size_t n_samples;
} QnEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread; empty after a
 successful call. Valid until the next call on this thread.
 */
const char *qn_last_error_message(void);

/*
 Loads a model file written by the CLI.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QnStatus qn_model_load(const char *path, struct QnModel **out);

/*
 Parses a model from its JSON text.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum QnStatus qn_model_from_json(const char *json, struct QnModel **out);

/*
 Releases a model. Null is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void qn_model_free(struct QnModel *model);

/*
 Number of input channels and the warm-up length the model needs.

 # Safety
 `model` must be a live handle; outputs must be writable.
 */
enum QnStatus qn_model_shape(const struct QnModel *model, size_t *n_channels, size_t *warmup_len);

/*
 Name of input channel `index`, NUL-terminated, copied into `buf`.

 # Safety
 `model` must be a live handle; `buf` must hold `buf_len` bytes.
 */
enum QnStatus qn_model_channel_name(const struct QnModel *model,
                                    size_t index,
                                    char *buf,
                                    size_t buf_len);

/*
 Forecasts `len` samples.

 `inputs` holds `n_channels * len` values, channel after channel, in the
 model's channel order. Open loop needs `len` recorded scores in
 `scores`; closed loop needs at least the warm-up length. `out` receives
 `len` values, the warm-up copied from `scores`.

 # Safety
 Pointers must reference arrays of the stated sizes.
 */
enum QnStatus qn_model_forecast(const struct QnModel *model,
                                const double *inputs,
                                size_t n_channels,
                                size_t len,
                                const double *scores,
                                size_t scores_len,
                                enum QnLoopMode mode,
                                double *out);

/*
 RMSE, PLCC, SROCC and outage rate of `pred` against `truth`.

 # Safety
 `pred` and `truth` must hold `len` values; `out` must be writable.
 */
enum QnStatus qn_evaluate(const double *pred,
                          const double *truth,
                          size_t len,
                          double delta,
                          struct QnEval *out);

/*
 Full-reference quality of one 8-bit luma frame pair, row-major.

 # Safety
 `reference` and `distorted` must hold `width * height` bytes; `out`
 must be writable.
 */
enum QnStatus qn_frame_metric(enum QnFrameMetric metric,
                              const uint8_t *reference,
                              const uint8_t *distorted,
                              size_t width,
                              size_t height,
                              double *out);

/*
 Library version, NUL-terminated, static.
 */
const char *qn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QOE_NARX_H */
