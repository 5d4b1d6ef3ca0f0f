#ifndef BLINDSPOT_H
#define BLINDSPOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by fallible calls.
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  // A required pointer argument was null.
  BS_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8.
  BS_STATUS_INVALID_UTF8 = 2,
  // The completion opens a reasoning block that never closes.
  BS_STATUS_MALFORMED_COMPLETION = 3,
  // Input failed validation (e.g. bad lexicon JSON).
  BS_STATUS_INVALID_INPUT = 4,
} BsStatus;

// Censorship labels (mirrors the core taxonomy).
typedef enum BsLabel {
  BS_LABEL_NOT_CENSORED = 0,
  BS_LABEL_TYPE1 = 1,
  BS_LABEL_TYPE2 = 2,
  BS_LABEL_TYPE3 = 3,
} BsLabel;

// Opaque classifier (lexicons + thresholds), heuristic mode.
typedef struct BsClassifier BsClassifier;

// Opaque parsed completion.
typedef struct BsCompletion BsCompletion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *bs_version(void);

// Release a string allocated by this library.
//
// # Safety
// `s` must have been returned by a `bs_*` function and not yet freed.
void bs_string_free(char *s);

// Parse raw model output into reasoning and final answer. `open_delim`
// and `close_delim` may be null for the defaults (`<think>` and
// `</think>`). On success writes a handle to `out`.
//
// # Safety
// `raw` (and non-null delimiters) must be valid NUL-terminated
// strings; `out` must be a valid pointer.
enum BsStatus bs_completion_parse(const char *raw,
                                  const char *open_delim,
                                  const char *close_delim,
                                  struct BsCompletion **out);

// The reasoning segment, or null when the completion has none.
// Free with `bs_string_free`.
//
// # Safety
// `completion` must be a live handle from `bs_completion_parse`.
char *bs_completion_reasoning(const struct BsCompletion *completion);

// The final answer text. Free with `bs_string_free`.
//
// # Safety
// `completion` must be a live handle from `bs_completion_parse`.
char *bs_completion_final(const struct BsCompletion *completion);

// 1 when the reasoning segment holds at least `min_chars`
// non-whitespace characters (pass 0 for the default of 20), else 0;
// -1 on a null handle.
//
// # Safety
// `completion` must be a live handle from `bs_completion_parse`.
int bs_completion_has_substantive_reasoning(const struct BsCompletion *completion,
                                            uintptr_t min_chars);

// # Safety
// `completion` must be a handle from `bs_completion_parse`, freed at
// most once.
void bs_completion_free(struct BsCompletion *completion);

// Classifier with the built-in lexicons.
struct BsClassifier *bs_classifier_default(void);

// Classifier from lexicon JSON
// (`{"refusal_phrases": [...], "template_markers": [...]}`).
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be a valid
// pointer.
enum BsStatus bs_classifier_from_lexicon_json(const char *json, struct BsClassifier **out);

// # Safety
// `classifier` must be a handle from a `bs_classifier_*` constructor,
// freed at most once.
void bs_classifier_free(struct BsClassifier *classifier);

// Heuristic censorship verdict for a (question, raw completion) pair.
// Parses the completion with the default delimiters and writes the
// label to `out_label`.
//
// # Safety
// `classifier` must be a live handle; `question` and `raw` must be
// valid NUL-terminated strings; `out_label` must be a valid pointer.
enum BsStatus bs_classify(const struct BsClassifier *classifier,
                          const char *question,
                          const char *raw,
                          enum BsLabel *out_label);

// 1 if any refusal phrase matches `text`, 0 otherwise, -1 on error.
//
// # Safety
// `classifier` must be a live handle; `text` must be a valid
// NUL-terminated string.
int bs_is_refusal(const struct BsClassifier *classifier, const char *text);

// Build the reasoning-trigger attack prompt for iteration `iteration`
// (1-based): the prompt followed by that many newline-joined copies
// of `open_delim + " " + trigger`. Null `trigger`/`open_delim` use
// the defaults. Free the result with `bs_string_free`.
//
// # Safety
// `prompt` (and non-null `trigger`/`open_delim`) must be valid
// NUL-terminated strings.
char *bs_attack_prompt(const char *prompt,
                       const char *trigger,
                       const char *open_delim,
                       uint32_t iteration);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLINDSPOT_H */
