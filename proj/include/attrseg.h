#ifndef ATTRSEG_H
#define ATTRSEG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    ATTRSEG_OK = 0,
    ATTRSEG_ERR_INVALID_ARGUMENT = 1,
    ATTRSEG_ERR_IO = 2,
    ATTRSEG_ERR_RUNTIME = 3,
    ATTRSEG_ERR_CHECK_FAILED = 4
} attrseg_status;

/* Message for the most recent failing call on this thread. */
const char* attrseg_last_error(void);

/* Generate a synthetic dataset (images/ plus annotations.json) into out_dir.
   config_json may be NULL or "{}" for the defaults; unknown keys are
   rejected. */
attrseg_status attrseg_synth(const char* config_json, const char* out_dir);

/* Train on a dataset directory. Writes model.qsl1 (with optimizer state) and
   loss_log.txt into out_dir. config_json as above. */
attrseg_status attrseg_train(const char* config_json, const char* data_dir,
                             const char* out_dir);

typedef struct attrseg_model attrseg_model;

attrseg_status attrseg_model_load(const char* checkpoint_path,
                                  attrseg_model** out);
void attrseg_model_free(attrseg_model* model);

/* Evaluate the model on a dataset directory. Writes "key=value" lines into
   buf (NUL-terminated, truncated to buf_len). single_threshold != 0 reports
   the fixed-threshold diagnostic instead of the threshold-averaged metrics. */
attrseg_status attrseg_evaluate(attrseg_model* model, const char* data_dir,
                                int single_threshold, char* buf, size_t buf_len);

/* Run on one PNG; writes overlay.png, instances.txt and instances.json into
   out_dir. Instances below score_threshold are dropped. */
attrseg_status attrseg_infer(attrseg_model* model, const char* image_path,
                             const char* out_dir, double score_threshold);

/* Finite-difference gradient audit of the autodiff engine, the loss terms and
   a full small model. Writes one "name err=... pass|FAIL" line per entry into
   buf. Returns ATTRSEG_ERR_CHECK_FAILED if any entry fails. inject_fault != 0
   adds a deliberately broken entry to exercise the failure path. */
attrseg_status attrseg_gradcheck(uint64_t seed, int inject_fault, char* buf,
                                 size_t buf_len);

#ifdef __cplusplus
}
#endif

#endif /* ATTRSEG_H */
