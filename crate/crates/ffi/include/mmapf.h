#ifndef MMAPF_H
#define MMAPF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum MapfStatus {
  MAPF_STATUS_OK = 0,
  MAPF_STATUS_NULL_ARGUMENT = 1,
  MAPF_STATUS_INVALID_UTF8 = 2,
  MAPF_STATUS_SCHEMA = 3,
  MAPF_STATUS_UNSAT = 4,
  MAPF_STATUS_TIMEOUT = 5,
  MAPF_STATUS_NEGATIVE = 6,
  MAPF_STATUS_INTERNAL = 7,
} MapfStatus;

// Opaque instance handle.
typedef struct MapfInstance MapfInstance;

// Opaque plan handle.
typedef struct MapfPlan MapfPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *mapf_last_error(void);

// Library version as a static string.
const char *mapf_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void mapf_string_free(char *s);

// Parses an instance file.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum MapfStatus mapf_instance_from_json(const char *json, struct MapfInstance **out);

// Releases an instance. Null is ignored.
//
// # Safety
// `instance` must be null or a handle from [`mapf_instance_from_json`],
// not yet freed.
void mapf_instance_free(struct MapfInstance *instance);

// Number of agents, or 0 for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
size_t mapf_instance_agent_count(const struct MapfInstance *instance);

// Solves optimally. Returns `Ok` with a plan in `out`, `Unsat`, or
// `Timeout`. A `timeout_ms` of 0 means no time limit.
//
// # Safety
// `instance` must be a live handle and `out` a valid pointer.
enum MapfStatus mapf_solve(const struct MapfInstance *instance,
                           uint64_t timeout_ms,
                           struct MapfPlan **out);

// Parses a plan file against `instance`'s graph.
//
// # Safety
// `instance` must be a live handle, `json` a valid NUL-terminated string
// and `out` a valid pointer.
enum MapfStatus mapf_plan_from_json(const struct MapfInstance *instance,
                                    const char *json,
                                    struct MapfPlan **out);

// Releases a plan. Null is ignored.
//
// # Safety
// `plan` must be null or a live plan handle, not yet freed.
void mapf_plan_free(struct MapfPlan *plan);

// Makespan of the plan (latest completion time), or 0 for null.
//
// # Safety
// `plan` must be null or a live handle.
uint32_t mapf_plan_makespan(const struct MapfPlan *plan);

// Canonical plan file text, or null for a null handle. Free with
// [`mapf_string_free`].
//
// # Safety
// `plan` must be null or a live handle.
char *mapf_plan_to_json(const struct MapfPlan *plan);

// Validates `plan`. Returns `Ok` when feasible and `Negative` otherwise;
// either way the report JSON is stored in `report` when it is non-null.
//
// # Safety
// Handles must be live; `report` must be null or a valid pointer.
enum MapfStatus mapf_validate(const struct MapfInstance *instance,
                              const struct MapfPlan *plan,
                              char **report);

// Answers a query given as JSON (`{"kind": "why_wait", ...}`, see the
// command-line documentation). `plan` is required for wait queries and may
// be null otherwise. The answer JSON goes to `out`.
//
// # Safety
// `instance` must be a live handle, `plan` null or live, `query` a valid
// NUL-terminated string and `out` a valid pointer.
enum MapfStatus mapf_explain(const struct MapfInstance *instance,
                             const struct MapfPlan *plan,
                             const char *query,
                             uint64_t timeout_ms,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMAPF_H */
