/* C interface to the TS-LSTM video captioning library.
 *
 * All entry points take a context handle used for error reporting: on a
 * nonzero return, tslstm_last_error() holds a message valid until the next
 * call on the same context. Strings returned through char** out-parameters
 * are heap-allocated and must be released with tslstm_string_free().
 */
#ifndef TSLSTM_H
#define TSLSTM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tslstm_ctx tslstm_ctx;
typedef struct tslstm_model tslstm_model;

enum tslstm_status {
  TSLSTM_OK = 0,
  TSLSTM_ERR_CONFIG = 1,    /* invalid configuration or arguments */
  TSLSTM_ERR_RUNTIME = 2,   /* IO or runtime failure */
  TSLSTM_ERR_GRADCHECK = 3  /* gradient check ran but did not pass */
};

tslstm_ctx* tslstm_ctx_new(void);
void tslstm_ctx_free(tslstm_ctx* ctx);
const char* tslstm_last_error(const tslstm_ctx* ctx);

void tslstm_string_free(char* s);

/* Generate a synthetic dataset under out_dir. config_json is the run
 * configuration document (sections: seed, model, train, synth, decode,
 * gradcheck; unknown keys are rejected). summary_json is optional. */
int tslstm_synth(tslstm_ctx* ctx, const char* config_json, const char* out_dir,
                 char** summary_json);

/* Train on the dataset at manifest_path; writes checkpoint.json and
 * train_log.json under out_dir. resume_checkpoint may be NULL. */
int tslstm_train(tslstm_ctx* ctx, const char* config_json, const char* manifest_path,
                 const char* out_dir, const char* resume_checkpoint, char** summary_json);

/* Finite-difference gradient check on a miniature model. mutate != 0 runs
 * with a deliberately broken LSTM backward pass (the check must then
 * fail). Returns TSLSTM_ERR_GRADCHECK when the check does not pass. */
int tslstm_gradcheck(tslstm_ctx* ctx, const char* config_json, int mutate,
                     char** report_json);

/* Opaque trained-model handle loaded from a checkpoint file. */
tslstm_model* tslstm_model_load(tslstm_ctx* ctx, const char* checkpoint_path);
void tslstm_model_free(tslstm_model* model);

/* Beam-search captions for every video of a dataset split ("train", "val"
 * or "test"); writes an id -> caption JSON document to out_path (pass NULL
 * to skip the write). beam_width/max_len <= 0 use the defaults (5, 30). */
int tslstm_model_caption_split(tslstm_ctx* ctx, tslstm_model* model,
                               const char* manifest_path, const char* split, int beam_width,
                               int max_len, const char* out_path, char** captions_json);

/* Caption a single binary feature file. */
int tslstm_model_caption_features(tslstm_ctx* ctx, tslstm_model* model,
                                  const char* features_path, int beam_width, int max_len,
                                  char** caption_json);

/* Score a captions file against the references of a dataset split. */
int tslstm_eval(tslstm_ctx* ctx, const char* captions_path, const char* manifest_path,
                const char* split, char** report_json);

/* Train and evaluate once per segment count in ne_values (shared seed and
 * data) and emit the comparison table. */
int tslstm_ablate_ne(tslstm_ctx* ctx, const char* config_json, const size_t* ne_values,
                     size_t n_values, const char* manifest_path, const char* out_dir,
                     char** table_json);

#ifdef __cplusplus
}
#endif

#endif /* TSLSTM_H */
