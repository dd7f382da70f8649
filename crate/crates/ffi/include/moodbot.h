#ifndef MOODBOT_H
#define MOODBOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MoodbotStatus {
  MOODBOT_STATUS_OK = 0,
  MOODBOT_STATUS_NULL_ARGUMENT = 1,
  MOODBOT_STATUS_INVALID_UTF8 = 2,
  MOODBOT_STATUS_INVALID_JSON = 3,
  MOODBOT_STATUS_INVALID_CONFIG = 4,
  MOODBOT_STATUS_INVALID_SKILL = 5,
  MOODBOT_STATUS_SESSION_NOT_FOUND = 6,
  MOODBOT_STATUS_UNSUPPORTED_LANGUAGE = 7,
  MOODBOT_STATUS_ENGINE_ERROR = 8,
  MOODBOT_STATUS_PANIC = 9,
} MoodbotStatus;

// Opaque engine handle.
typedef struct MoodbotEngine MoodbotEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Create an engine over the shipped assets and default configuration.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum MoodbotStatus moodbot_engine_new_default(struct MoodbotEngine **out);

// Create an engine from a JSON configuration document. Asset paths in the
// configuration are read from disk; unset ones use the shipped assets.
//
// # Safety
// `config_json` is a NUL-terminated string; `out` is a valid pointer.
enum MoodbotStatus moodbot_engine_from_config(const char *config_json, struct MoodbotEngine **out);

// Release an engine. Null is ignored.
//
// # Safety
// `engine` is null or a handle from this library not yet freed.
void moodbot_engine_free(struct MoodbotEngine *engine);

// Start a session. `language` may be null for the default language.
// Writes the new session id and the greeting turn result as JSON.
//
// # Safety
// Pointers are valid; strings are NUL-terminated.
enum MoodbotStatus moodbot_session_create(const struct MoodbotEngine *engine,
                                          const char *language,
                                          char **session_id_out,
                                          char **greeting_json_out);

// Process one text message. `language` may be null to detect it.
// Writes the turn result as JSON.
//
// # Safety
// Pointers are valid; strings are NUL-terminated.
enum MoodbotStatus moodbot_session_send(const struct MoodbotEngine *engine,
                                        const char *session_id,
                                        const char *text,
                                        const char *language,
                                        char **result_json_out);

// Write a session's transcript as JSON.
//
// # Safety
// Pointers are valid; strings are NUL-terminated.
enum MoodbotStatus moodbot_session_transcript(const struct MoodbotEngine *engine,
                                              const char *session_id,
                                              char **transcript_json_out);

// Validate a skill document. The report is written as JSON whenever the
// document parses; the status is `INVALID_SKILL` if it lists violations.
//
// # Safety
// Pointers are valid; strings are NUL-terminated.
enum MoodbotStatus moodbot_validate_skill(const char *skill_json, char **report_json_out);

// Score English text with the shipped lexicon. Writes the analysis as JSON.
//
// # Safety
// Pointers are valid; strings are NUL-terminated.
enum MoodbotStatus moodbot_analyze_tone(const char *text,
                                        double threshold,
                                        char **analysis_json_out);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or a string from this library not yet freed.
void moodbot_string_free(char *s);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *moodbot_last_error(void);

// Library version as a static string.
const char *moodbot_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOODBOT_H */
