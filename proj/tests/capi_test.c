/* SPDX-License-Identifier: Apache-2.0
 *
 * Exercises the public C interface end to end: preset enumeration, scenario
 * loading, runs, report serialization, comparison, and the error-status
 * contract. Pure C so it also proves the header compiles without C++.
 */
#include <fabricsim/fabricsim.h>

#include <stdio.h>
#include <string.h>

static int g_failures = 0;

#define CHECK(cond)                                                       \
  do {                                                                    \
    if (!(cond)) {                                                        \
      ++g_failures;                                                       \
      fprintf(stderr, "FAIL %s:%d: %s\n", __FILE__, __LINE__, #cond);     \
    }                                                                     \
  } while (0)

static const char* k_small_scenario =
    "{"
    "\"name\": \"capi-small\", \"seed\": 5,"
    "\"topology\": {\"kind\": \"single_hop_clos\", \"accelerators\": 2,"
    "               \"tech\": \"CXL3\"},"
    "\"workload\": {\"kind\": \"collective\", \"bytes\": 4096,"
    "               \"accelerator_count\": 2}"
    "}";

static void test_version_and_presets(void) {
  const char* v = fsim_version();
  CHECK(v != NULL && v[0] != '\0');

  int n = fsim_preset_count();
  CHECK(n == 8);
  CHECK(fsim_preset_name(-1) == NULL);
  CHECK(fsim_preset_name(n) == NULL);
  int found_rag = 0;
  for (int i = 0; i < n; ++i) {
    const char* name = fsim_preset_name(i);
    CHECK(name != NULL);
    if (name && strcmp(name, "rag_cxl_vs_rdma.cxl") == 0) found_rag = 1;
  }
  CHECK(found_rag);

  fsim_scenario_t* s = NULL;
  CHECK(fsim_preset_load("supercluster_2cluster.cxl", &s) == FSIM_OK);
  CHECK(s != NULL);
  char* violations = NULL;
  CHECK(fsim_scenario_validate(s, &violations) == FSIM_OK);
  CHECK(violations != NULL && strcmp(violations, "[]") == 0);
  fsim_string_free(violations);
  fsim_scenario_free(s);

  CHECK(fsim_preset_load("nope", &s) == FSIM_ERR_INVALID);
  CHECK(strstr(fsim_last_error(), "unknown-preset") != NULL);
}

static void test_error_statuses(void) {
  fsim_scenario_t* s = NULL;
  CHECK(fsim_scenario_load_string("{oops", &s) == FSIM_ERR_PARSE);
  CHECK(strstr(fsim_last_error(), "bad-json") != NULL);

  CHECK(fsim_scenario_load_string("{\"topology\": {}, \"workload\": {},"
                                  " \"speling\": 1}",
                                  &s) == FSIM_ERR_PARSE);
  CHECK(strstr(fsim_last_error(), "unknown-key") != NULL);

  CHECK(fsim_scenario_load_file("/nonexistent/fsim.json", &s) ==
        FSIM_ERR_PARSE);
  CHECK(strstr(fsim_last_error(), "no-file") != NULL);

  CHECK(fsim_scenario_load_string(NULL, &s) == FSIM_ERR_INVALID);
  CHECK(fsim_report_makespan_ns(NULL) == -1);

  /* Structurally invalid fabric: the violation surfaces through validate()
   * as data and through run() as a status. */
  const char* too_many =
      "{"
      "\"topology\": {\"kind\": \"single_hop_clos\", \"hosts\": 1,"
      "               \"accelerators\": 257},"
      "\"workload\": {\"kind\": \"collective\", \"bytes\": 64,"
      "               \"accelerator_count\": 2}"
      "}";
  CHECK(fsim_scenario_load_string(too_many, &s) == FSIM_OK);
  char* violations = NULL;
  CHECK(fsim_scenario_validate(s, &violations) == FSIM_OK);
  CHECK(violations != NULL &&
        strstr(violations, "accel-per-root-port") != NULL);
  fsim_string_free(violations);
  fsim_report_t* r = NULL;
  CHECK(fsim_scenario_run(s, &r) == FSIM_ERR_VALIDATE);
  CHECK(strstr(fsim_last_error(), "accel-per-root-port") != NULL);
  fsim_scenario_free(s);

  /* Freeing NULL is a no-op everywhere. */
  fsim_scenario_free(NULL);
  fsim_report_free(NULL);
  fsim_string_free(NULL);
}

static void test_run_and_reports(void) {
  fsim_scenario_t* s = NULL;
  CHECK(fsim_scenario_load_string(k_small_scenario, &s) == FSIM_OK);
  CHECK(strcmp(fsim_scenario_name(s), "capi-small") == 0);
  CHECK(fsim_scenario_set_seed(s, 5) == FSIM_OK);
  CHECK(fsim_scenario_set_routing(s, "best") == FSIM_ERR_INVALID);
  CHECK(fsim_scenario_set_routing(s, "hbr") == FSIM_OK);

  fsim_report_t* baseline = NULL;
  CHECK(fsim_scenario_run(s, &baseline) == FSIM_OK);
  CHECK(fsim_report_makespan_ns(baseline) > 0);

  char* json = NULL;
  CHECK(fsim_report_json(baseline, &json) == FSIM_OK);
  CHECK(json != NULL && strstr(json, "\"makespan_ns\"") != NULL);

  char* csv = NULL;
  CHECK(fsim_report_csv(baseline, &csv) == FSIM_OK);
  CHECK(csv != NULL && strncmp(csv, "metric,key,value", 16) == 0);
  fsim_string_free(csv);

  CHECK(fsim_report_write(baseline, "/tmp/fsim_capi_test.json", "yaml") ==
        FSIM_ERR_INVALID);
  CHECK(fsim_report_write(baseline, "/tmp/fsim_capi_test.json", "json") ==
        FSIM_OK);
  FILE* f = fopen("/tmp/fsim_capi_test.json", "r");
  CHECK(f != NULL);
  if (f) fclose(f);

  /* JSON round trip preserves the run. */
  fsim_report_t* copy = NULL;
  CHECK(fsim_report_load_json(json, &copy) == FSIM_OK);
  CHECK(fsim_report_makespan_ns(copy) == fsim_report_makespan_ns(baseline));
  fsim_string_free(json);
  CHECK(fsim_report_load_json("not json", &copy) == FSIM_ERR_PARSE);

  /* Same workload under a different routing policy stays comparable. */
  CHECK(fsim_scenario_set_routing(s, "pbr") == FSIM_OK);
  fsim_report_t* candidate = NULL;
  CHECK(fsim_scenario_run(s, &candidate) == FSIM_OK);
  char* cmp = NULL;
  CHECK(fsim_report_compare(baseline, candidate, &cmp) == FSIM_OK);
  CHECK(cmp != NULL && strstr(cmp, "\"makespan_speedup\"") != NULL);
  fsim_string_free(cmp);

  /* A different seed reshuffles the workload tag: incomparable. */
  CHECK(fsim_scenario_set_seed(s, 6) == FSIM_OK);
  fsim_report_t* other = NULL;
  CHECK(fsim_scenario_run(s, &other) == FSIM_OK);
  CHECK(fsim_report_compare(baseline, other, &cmp) == FSIM_ERR_RUNTIME);
  CHECK(strstr(fsim_last_error(), "incomparable") != NULL);

  fsim_report_free(other);
  fsim_report_free(candidate);
  fsim_report_free(copy);
  fsim_report_free(baseline);
  fsim_scenario_free(s);
}

int main(void) {
  test_version_and_presets();
  test_error_statuses();
  test_run_and_reports();
  if (g_failures) {
    fprintf(stderr, "%d check(s) failed\n", g_failures);
    return 1;
  }
  printf("capi_test: all checks passed\n");
  return 0;
}
