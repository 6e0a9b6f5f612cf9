/* SPDX-License-Identifier: Apache-2.0 */

#ifndef UNIEDIT_H
#define UNIEDIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum UeStatus {
  UE_STATUS_OK = 0,
  UE_STATUS_NULL_POINTER = 1,
  UE_STATUS_INVALID_UTF8 = 2,
  UE_STATUS_INVALID_JSON = 3,
  UE_STATUS_INVALID_CONFIG = 4,
  UE_STATUS_UNKNOWN_TOKEN = 5,
  UE_STATUS_GRAMMAR = 6,
  UE_STATUS_UNRESOLVED_REFERENT = 7,
  UE_STATUS_UNSUPPORTED_TASK = 8,
  UE_STATUS_INVALID_GRAPH = 9,
  UE_STATUS_VOCABULARY = 10,
  UE_STATUS_NUMERIC = 11,
  UE_STATUS_IO = 12,
  UE_STATUS_PANIC = 13,
} UeStatus;

// A concept vocabulary.
typedef struct UeWorld UeWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a successful call.
// The pointer stays valid until the next call on the same thread.
const char *ue_last_error_message(void);

// Library version as a static string.
const char *ue_version(void);

// Builds the default world for `seed`.
//
// # Safety
// `out` must be a valid pointer to a writable `UeWorld *`.
enum UeStatus ue_world_default(uint64_t seed, struct UeWorld **out);

// Loads a world from vocabulary JSON as written by `uniedit gen-world`.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer to a writable `UeWorld *`.
enum UeStatus ue_world_from_json(const char *json, struct UeWorld **out);

// Latent dimension of the world, or 0 for a null handle.
//
// # Safety
// `world` must be null or a handle returned by this library.
size_t ue_world_dimension(const struct UeWorld *world);

// Serializes the world back to vocabulary JSON.
//
// # Safety
// `w` must be a live handle and `out` a valid pointer to a writable `char *`.
enum UeStatus ue_world_to_json(const struct UeWorld *w, char **out);

// Releases a world. Null is ignored.
//
// # Safety
// `world` must be null or a handle returned by this library that has not been freed.
void ue_world_free(struct UeWorld *world);

// Parses `instruction` against `scene_json` and writes the edit plan as JSON.
//
// # Safety
// String arguments must be nul-terminated; `w` must be a live handle and `out` a valid
// pointer to a writable `char *`.
enum UeStatus ue_edit_plan(const struct UeWorld *w,
                           const char *scene_json,
                           const char *instruction,
                           const char *task_name,
                           char **out);

// Runs the understand / edit / verify loop and writes the result summary as JSON.
// `config_toml` uses the keys of the CLI config file and may be null for defaults;
// its `seed`, `world` and `out` keys are ignored.
//
// # Safety
// String arguments must be nul-terminated (`config_toml` may be null); `w` must be a live
// handle and `out` a valid pointer to a writable `char *`.
enum UeStatus ue_edit_run(const struct UeWorld *w,
                          const char *scene_json,
                          const char *instruction,
                          const char *task_name,
                          const char *config_toml,
                          uint64_t seed,
                          char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library that has not been freed.
void ue_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNIEDIT_H */
