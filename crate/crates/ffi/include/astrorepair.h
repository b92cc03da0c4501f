#ifndef ASTROREPAIR_H
#define ASTROREPAIR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AstroStatus {
  ASTRO_STATUS_OK = 0,
  ASTRO_STATUS_NULL_POINTER = 1,
  ASTRO_STATUS_INVALID_ARGUMENT = 2,
  ASTRO_STATUS_CONFIG = 3,
  ASTRO_STATUS_NUMERIC = 4,
  ASTRO_STATUS_DOMAIN = 5,
  ASTRO_STATUS_INFEASIBLE = 6,
  ASTRO_STATUS_IO = 7,
  ASTRO_STATUS_OUT_OF_RANGE = 8,
  ASTRO_STATUS_PANIC = 9,
} AstroStatus;

typedef enum AstroCommand {
  ASTRO_COMMAND_SELFREPAIR = 0,
  ASTRO_COMMAND_CLUSTERS = 1,
  ASTRO_COMMAND_SYNTHESIZE = 2,
  ASTRO_COMMAND_FAULTS = 3,
  ASTRO_COMMAND_RELIABILITY = 4,
  ASTRO_COMMAND_AREA = 5,
  ASTRO_COMMAND_POWER = 6,
  ASTRO_COMMAND_PWL = 7,
} AstroCommand;

typedef enum AstroCoreKind {
  ASTRO_CORE_KIND_UBRAIN = 0,
  ASTRO_CORE_KIND_CROSSBAR = 1,
} AstroCoreKind;

// Opaque experiment configuration.
typedef struct AstroConfig AstroConfig;

// Opaque result of one experiment run.
typedef struct AstroReport AstroReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or an empty string. Valid until the next
// failing call on the same thread.
const char *astro_last_error(void);

// # Safety
// `out` must be a valid pointer.
enum AstroStatus astro_config_default(struct AstroConfig **out);

// Parse and validate a JSON config.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum AstroStatus astro_config_from_json(const char *json, struct AstroConfig **out);

// # Safety
// `cfg` must come from this library and not be used afterwards. Null is ignored.
void astro_config_free(struct AstroConfig *cfg);

// Run one experiment. Nothing is written to disk; read the outputs from the report.
// `command` takes an [`AstroCommand`] value.
//
// # Safety
// `cfg` must be a live config handle and `out` a valid pointer.
enum AstroStatus astro_run(const struct AstroConfig *cfg,
                           uint32_t command,
                           uint64_t seed,
                           struct AstroReport **out);

// 1 when every acceptance check in the report passed, else 0; 0 for null.
//
// # Safety
// `report` must be a live report handle or null.
int32_t astro_report_passed(const struct AstroReport *report);

// The report's summary text, owned by the report.
//
// # Safety
// `report` must be a live report handle or null.
const char *astro_report_summary(const struct AstroReport *report);

// # Safety
// `report` must be a live report handle or null.
size_t astro_report_artifact_count(const struct AstroReport *report);

// Borrow artifact `index`: its file name and contents, both owned by the report.
//
// # Safety
// `report` must be a live report handle; the out-pointers must be valid.
enum AstroStatus astro_report_artifact(const struct AstroReport *report,
                                       size_t index,
                                       const char **name,
                                       const uint8_t **data,
                                       size_t *len);

// # Safety
// `report` must come from this library and not be used afterwards. Null is ignored.
void astro_report_free(struct AstroReport *report);

// Clusters needed for `params` synapses on the config's core of `kind`, an
// [`AstroCoreKind`] value.
//
// # Safety
// `cfg` must be a live config handle and `out` a valid pointer.
enum AstroStatus astro_cluster_count(const struct AstroConfig *cfg,
                                     uint32_t kind,
                                     uint64_t params,
                                     uint64_t *out);

// Poisson probability of exactly `n` failures in `interval_hours` at rate `lambda` per hour.
//
// # Safety
// `out` must be a valid pointer.
enum AstroStatus astro_p_failures(double lambda, double interval_hours, uint32_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASTROREPAIR_H */
