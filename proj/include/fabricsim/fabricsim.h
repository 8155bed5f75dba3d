/* SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the fabric simulator. Scenarios load from JSON (file,
 * string or embedded preset), run deterministically for a given seed, and
 * produce reports serializable as JSON or CSV. All functions returning int
 * yield FSIM_OK (0) or a negative fsim_status; fsim_last_error() describes
 * the most recent failure on the calling thread as "code: message".
 *
 * Strings returned through char** out-parameters are heap-allocated and
 * must be released with fsim_string_free().
 */
#ifndef FABRICSIM_H
#define FABRICSIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fsim_scenario fsim_scenario_t;
typedef struct fsim_report fsim_report_t;

enum fsim_status {
  FSIM_OK = 0,
  FSIM_ERR_INVALID = -1,  /* bad arguments, unknown names */
  FSIM_ERR_PARSE = -2,    /* malformed scenario/report JSON */
  FSIM_ERR_VALIDATE = -3, /* fabric violates a structural limit */
  FSIM_ERR_RUNTIME = -4   /* simulation failed (unreachable, no-nic, ...) */
};

const char* fsim_version(void);
const char* fsim_last_error(void);

/* -- scenarios ---------------------------------------------------------- */
int fsim_scenario_load_file(const char* path, fsim_scenario_t** out);
int fsim_scenario_load_string(const char* json_text, fsim_scenario_t** out);
void fsim_scenario_free(fsim_scenario_t* s);

const char* fsim_scenario_name(const fsim_scenario_t* s);
int fsim_scenario_set_seed(fsim_scenario_t* s, uint64_t seed);
/* policy: "hbr" or "pbr" */
int fsim_scenario_set_routing(fsim_scenario_t* s, const char* policy);

/* Structural violations as a JSON array (empty array means valid). */
int fsim_scenario_validate(const fsim_scenario_t* s, char** out_json);
int fsim_scenario_run(const fsim_scenario_t* s, fsim_report_t** out);

/* -- embedded presets --------------------------------------------------- */
int fsim_preset_count(void);
const char* fsim_preset_name(int index);
int fsim_preset_load(const char* name, fsim_scenario_t** out);

/* -- reports ------------------------------------------------------------ */
void fsim_report_free(fsim_report_t* r);
int fsim_report_json(const fsim_report_t* r, char** out_json);
int fsim_report_csv(const fsim_report_t* r, char** out_csv);
/* format: "json" or "csv" */
int fsim_report_write(const fsim_report_t* r, const char* path,
                      const char* format);
int fsim_report_load_json(const char* json_text, fsim_report_t** out);
int64_t fsim_report_makespan_ns(const fsim_report_t* r);

/* Baseline vs candidate comparison as JSON; fails with FSIM_ERR_RUNTIME
 * ("incomparable") when the two runs executed different workloads. */
int fsim_report_compare(const fsim_report_t* baseline,
                        const fsim_report_t* candidate, char** out_json);

void fsim_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* FABRICSIM_H */
