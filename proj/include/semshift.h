/* semshift — semantic-shift fine-tuning toolkit, public C API.
 *
 * The library trains a student text encoder that mimics a frozen teacher on
 * benign prompts while steering a chosen family of adversarial prompts onto
 * the teacher embedding of a fixed target prompt. This header is the only
 * public surface: a flat C API over opaque handles, safe to call from C,
 * C++, or any FFI.
 *
 * Conventions
 *   - Every fallible function returns a semshift_status (0 == success).
 *     On failure, semshift_last_error() returns a human-readable message
 *     describing what went wrong; the message is thread-local and remains
 *     valid until the next API call on the same thread.
 *   - Handles are created by the library and must be released with the
 *     matching *_free function. Passing NULL to a *_free is a no-op.
 *   - Pointer parameters marked "optional" accept NULL; all other pointer
 *     parameters must be non-NULL or the call fails with
 *     SEMSHIFT_INVALID_ARGUMENT.
 *   - All paths are UTF-8, all text is plain ASCII/UTF-8 bytes.
 *
 * Configuration keys, file formats, and the seed-derivation scheme are
 * documented in the README. Stage functions read every knob from a
 * semshift_config; unset keys fall back to built-in defaults.
 */

#ifndef SEMSHIFT_H
#define SEMSHIFT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32) && defined(SEMSHIFT_BUILD_SHARED)
#define SEMSHIFT_API __declspec(dllexport)
#elif defined(__GNUC__)
#define SEMSHIFT_API __attribute__((visibility("default")))
#else
#define SEMSHIFT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* ---------------------------------------------------------------- status */

typedef enum semshift_status {
    SEMSHIFT_OK = 0,               /* success                               */
    SEMSHIFT_INVALID_ARGUMENT = 1, /* bad value, unknown key, NULL pointer  */
    SEMSHIFT_SHAPE_ERROR = 2,      /* tensor/buffer dimension mismatch      */
    SEMSHIFT_PARSE_ERROR = 3,      /* malformed config, JSON, or number     */
    SEMSHIFT_NUMERIC_ERROR = 4,    /* non-finite value or failed iteration  */
    SEMSHIFT_STATE_ERROR = 5,      /* operation illegal in current state    */
    SEMSHIFT_IO_ERROR = 6,         /* file missing, unreadable, unwritable  */
    SEMSHIFT_INTERNAL_ERROR = 7    /* unexpected failure inside the library */
} semshift_status;

/* Library version as "major.minor.patch". Static storage, never NULL. */
SEMSHIFT_API const char* semshift_version(void);

/* Message for the most recent failure on the calling thread, or "" when the
 * most recent call succeeded. Never NULL. */
SEMSHIFT_API const char* semshift_last_error(void);

/* ---------------------------------------------------------------- config */

/* A flat key=value configuration with a closed schema. Layering is by call
 * order — load a file first, then apply the environment, then set flags —
 * so later writers win:
 *
 *   built-in defaults < config file < SEMSHIFT_SEED env var < set() calls
 */
typedef struct semshift_config semshift_config;

/* Fresh config holding no explicit values (everything at defaults).
 * Returns NULL only on allocation failure. */
SEMSHIFT_API semshift_config* semshift_config_create(void);
SEMSHIFT_API void semshift_config_free(semshift_config* cfg);

/* Overlays `key = value` lines from a file. Unknown keys and malformed
 * lines fail with the offending line number in the error message. */
SEMSHIFT_API int semshift_config_load_file(semshift_config* cfg, const char* path);

/* Overlays one value; fails for keys outside the schema. */
SEMSHIFT_API int semshift_config_set(semshift_config* cfg, const char* key,
                                     const char* value);

/* Applies environment overrides (SEMSHIFT_SEED, when set and non-empty,
 * replaces the "seed" key; a non-numeric value is a parse error). */
SEMSHIFT_API int semshift_config_apply_env(semshift_config* cfg);

/* Stored value for `key`, or NULL when the key is unset (defaults are not
 * materialized). The pointer stays valid until the config is next modified,
 * queried, or freed. */
SEMSHIFT_API const char* semshift_config_get(const semshift_config* cfg,
                                             const char* key);

/* ---------------------------------------------------------------- stages */

/* Generates a synthetic prompt corpus into `out_dir`:
 *   corpus.jsonl       benign + adversarial + reference records
 *   paraphrases.jsonl  held-out adversarial paraphrases (unseen templates)
 *   aux.json           class prompts, insertion words, synonym table
 * Reads synth.* sizes and the master seed from `cfg`. */
SEMSHIFT_API int semshift_gen_synth(const semshift_config* cfg, const char* out_dir);

/* Builds the vocabulary from `corpus_jsonl`, initializes a fresh encoder
 * (encoder.* keys), pre-trains it as the frozen reference teacher, and
 * writes the checkpoint. */
SEMSHIFT_API int semshift_pretrain_teacher(const semshift_config* cfg,
                                           const char* corpus_jsonl,
                                           const char* out_checkpoint);

/* Expands the corpus's collected adversarial records via energy-guided
 * sampling against the teacher and writes the new records (provenance
 * "augmented") to `out_jsonl`. */
SEMSHIFT_API int semshift_augment(const semshift_config* cfg,
                                  const char* teacher_checkpoint,
                                  const char* corpus_jsonl, const char* out_jsonl);

/* Fine-tunes a clone of the teacher on corpus (+ optional augmented file),
 * writing the student checkpoint and, when `out_log` is given, a JSONL
 * epoch log. `augmented_jsonl` and `out_log` are optional. */
SEMSHIFT_API int semshift_train(const semshift_config* cfg,
                                const char* teacher_checkpoint,
                                const char* corpus_jsonl,
                                const char* augmented_jsonl,
                                const char* out_student, const char* out_log);

/* Evaluates student vs. teacher on the validation split of `corpus_jsonl`,
 * reading class prompts from `aux_json`, and writes the metrics report.
 * When `out_projection_csv` is given (optional), also writes the 2-D PCA
 * projection of the student embeddings. */
SEMSHIFT_API int semshift_eval(const semshift_config* cfg,
                               const char* teacher_checkpoint,
                               const char* student_checkpoint,
                               const char* corpus_jsonl, const char* aux_json,
                               const char* out_report,
                               const char* out_projection_csv);

/* Retrains one student per entry of the comma-separated `gammas` list (all
 * other train.* knobs shared), evaluates each on the common validation
 * split, and writes one CSV row per gamma. `augmented_jsonl` is optional. */
SEMSHIFT_API int semshift_gamma_sweep(const semshift_config* cfg,
                                      const char* teacher_checkpoint,
                                      const char* corpus_jsonl,
                                      const char* augmented_jsonl,
                                      const char* aux_json, const char* gammas,
                                      const char* out_csv);

/* ---------------------------------------------------------------- corpus */

/* An in-memory list of prompt records (text + role + category + provenance),
 * as stored in JSONL corpus files. */
typedef struct semshift_corpus semshift_corpus;

SEMSHIFT_API int semshift_corpus_load(const char* jsonl_path, semshift_corpus** out);
SEMSHIFT_API int semshift_corpus_save(const semshift_corpus* corpus,
                                      const char* jsonl_path);
/* Number of records; 0 for NULL. */
SEMSHIFT_API size_t semshift_corpus_size(const semshift_corpus* corpus);
/* Prompt text of record `index`, or NULL when out of range. Valid until the
 * corpus is freed. */
SEMSHIFT_API const char* semshift_corpus_text(const semshift_corpus* corpus,
                                              size_t index);
SEMSHIFT_API void semshift_corpus_free(semshift_corpus* corpus);

/* --------------------------------------------------------------- encoder */

/* A loaded encoder checkpoint (teacher or student). */
typedef struct semshift_encoder semshift_encoder;

SEMSHIFT_API int semshift_encoder_load(const char* checkpoint_path,
                                       semshift_encoder** out);
SEMSHIFT_API int semshift_encoder_save(const semshift_encoder* encoder,
                                       const char* checkpoint_path);
/* Embedding dimension, or -1 for NULL. */
SEMSHIFT_API int semshift_encoder_dim(const semshift_encoder* encoder);
/* Embeds `text` into out[0..out_len); `out_len` must equal the encoder
 * dimension. */
SEMSHIFT_API int semshift_encoder_embed(const semshift_encoder* encoder,
                                        const char* text, double* out,
                                        size_t out_len);
/* Cosine similarity between the two encoders' embeddings of the same text,
 * written to *out. The encoders may be the same handle. */
SEMSHIFT_API int semshift_encoder_similarity(const semshift_encoder* a,
                                             const semshift_encoder* b,
                                             const char* text, double* out);
SEMSHIFT_API void semshift_encoder_free(semshift_encoder* encoder);

/* ---------------------------------------------------------------- report */

/* A metrics report produced by semshift_eval. */
typedef struct semshift_report semshift_report;

SEMSHIFT_API int semshift_report_load(const char* json_path, semshift_report** out);

/* Scalar metric by name. Known names:
 *   sim_benign.mean  sim_benign.std   sim_advers.mean  sim_advers.std
 *   sim_target.mean  sim_target.std   agreement_at_1   agreement_at_5
 *   trigger_success_rate  benign_preservation_rate
 *   benign_count  adversarial_count  tau  benign_tau
 * Unknown names fail with SEMSHIFT_INVALID_ARGUMENT. */
SEMSHIFT_API int semshift_report_metric(const semshift_report* report,
                                        const char* name, double* out);

/* The report's target prompt. Valid until the report is freed. */
SEMSHIFT_API const char* semshift_report_target_prompt(const semshift_report* report);

SEMSHIFT_API void semshift_report_free(semshift_report* report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEMSHIFT_H */
