#ifndef REPOPROMPT_H
#define REPOPROMPT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_UTF8 = 2,
  RP_STATUS_IO = 3,
  RP_STATUS_INVALID_ARGUMENT = 4,
  RP_STATUS_PARSE = 5,
  RP_STATUS_TRANSPORT = 6,
  RP_STATUS_INTERNAL = 99,
} RpStatus;

typedef enum RpTokenizerKind {
  RP_TOKENIZER_KIND_BPE = 0,
  RP_TOKENIZER_KIND_FALLBACK = 1,
} RpTokenizerKind;

/**
 * A parsed repository.
 */
typedef struct RpIndex RpIndex;

/**
 * A trained classifier plus the embedding provider it was trained with.
 */
typedef struct RpModel RpModel;

typedef struct RpTokenizer RpTokenizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library; valid until the next call on the same thread.
 */
const char *rp_last_error(void);

/**
 * Library version, a static string.
 */
const char *rp_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void rp_string_free(char *s);

/**
 * Parses every `.java` file under `root`.
 *
 * # Safety
 * `root` must be a NUL-terminated string; `out` must be writable.
 */
enum RpStatus rp_index_build(const char *root, struct RpIndex **out);

/**
 * Loads an index written by [`rp_index_save`] or the `index` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RpStatus rp_index_load(const char *path, struct RpIndex **out);

/**
 * # Safety
 * `index` must be a live handle; `path` a NUL-terminated string.
 */
enum RpStatus rp_index_save(const struct RpIndex *index, const char *path);

/**
 * Number of source files in the index.
 *
 * # Safety
 * `index` must be a live handle; `out` must be writable.
 */
enum RpStatus rp_index_file_count(const struct RpIndex *index, size_t *out);

/**
 * # Safety
 * `index` must be null or a handle from this library, freed once.
 */
void rp_index_free(struct RpIndex *index);

/**
 * `vocab_dir` may be null to use the bundled GPT-2 vocabulary.
 *
 * # Safety
 * `vocab_dir` must be null or NUL-terminated; `out` must be writable.
 */
enum RpStatus rp_tokenizer_new(enum RpTokenizerKind kind,
                               const char *vocab_dir,
                               struct RpTokenizer **out);

/**
 * # Safety
 * `tok` must be a live handle, `text` NUL-terminated, `out` writable.
 */
enum RpStatus rp_tokenizer_count(const struct RpTokenizer *tok, const char *text, size_t *out);

/**
 * # Safety
 * `tok` must be null or a handle from this library, freed once.
 */
void rp_tokenizer_free(struct RpTokenizer *tok);

/**
 * Mines holes and returns them as JSON lines in `*out`.
 *
 * # Safety
 * `index` must be a live handle; `out` must be writable.
 */
enum RpStatus rp_mine_holes(const struct RpIndex *index, size_t cap, uint64_t seed, char **out);

/**
 * Context of one proposal for `hole_json`, within its share of `total`,
 * as a JSON object.
 *
 * # Safety
 * Handles must be live, `hole_json` NUL-terminated, `out` writable.
 */
enum RpStatus rp_proposal_context(const struct RpIndex *index,
                                  const struct RpTokenizer *tok,
                                  const char *hole_json,
                                  size_t proposal_id,
                                  size_t total,
                                  char **out);

/**
 * Full prompt text for one proposal. An inapplicable proposal is an
 * `InvalidArgument` error.
 *
 * # Safety
 * Handles must be live, `hole_json` NUL-terminated, `out` writable.
 */
enum RpStatus rp_compose_prompt(const struct RpIndex *index,
                                const struct RpTokenizer *tok,
                                const char *hole_json,
                                size_t proposal_id,
                                size_t total,
                                char **out);

/**
 * Loads a checkpoint. With `embed_url` null the built-in hashed embedding
 * is used, otherwise the embedding service at that URL.
 *
 * # Safety
 * `path` must be NUL-terminated, `embed_url` null or NUL-terminated, `out` writable.
 */
enum RpStatus rp_model_load(const char *path, const char *embed_url, struct RpModel **out);

/**
 * Top-`k` proposals for a hole as `{"ranking": [...], "probabilities": [...]}`.
 *
 * # Safety
 * Handles must be live, `hole_json` NUL-terminated, `out` writable.
 */
enum RpStatus rp_model_predict(const struct RpModel *model,
                               const struct RpIndex *index,
                               const struct RpTokenizer *tok,
                               const char *hole_json,
                               size_t total,
                               size_t k,
                               char **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed once.
 */
void rp_model_free(struct RpModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPOPROMPT_H */
