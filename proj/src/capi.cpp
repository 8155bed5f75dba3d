// SPDX-License-Identifier: Apache-2.0
#include "fabricsim/fabricsim.h"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "error.hpp"
#include "metrics.hpp"
#include "presets.hpp"
#include "scenario.hpp"

using namespace fabricsim;

struct fsim_scenario {
  Scenario s;
};
struct fsim_report {
  RunReport r;
};

namespace {

thread_local std::string g_last_error;

bool is_validation_code(const std::string& code) {
  static const char* kCodes[] = {
      "accel-per-root-port", "mem-per-root-port",   "xlink-multi-hop",
      "ualink-cluster-size", "nvlink-domain-size",  "xlink-cluster-size",
      "multilevel-switching", "sharing-unsupported", "mixed-xlink-tech",
  };
  for (const char* c : kCodes) {
    if (code == c) return true;
  }
  return false;
}

bool is_parse_code(const std::string& code) {
  return code == "bad-json" || code == "unknown-key" || code == "missing-key" ||
         code == "no-file" || code == "unknown-tech" || code == "bad-params";
}

int fail(int fallback) {
  try {
    throw;
  } catch (const SimError& e) {
    g_last_error = e.what();
    if (is_validation_code(e.code())) return FSIM_ERR_VALIDATE;
    if (is_parse_code(e.code())) return FSIM_ERR_PARSE;
    return fallback;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("bad-json: ") + e.what();
    return FSIM_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return fallback;
  } catch (...) {
    g_last_error = "internal: unknown error";
    return fallback;
  }
}

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int invalid(const char* what) {
  g_last_error = std::string("invalid-argument: ") + what;
  return FSIM_ERR_INVALID;
}

}  // namespace

extern "C" {

const char* fsim_version(void) { return "0.1.0"; }

const char* fsim_last_error(void) { return g_last_error.c_str(); }

int fsim_scenario_load_file(const char* path, fsim_scenario_t** out) {
  if (!path || !out) return invalid("null path/out");
  try {
    *out = new fsim_scenario{load_scenario_file(path)};
    return FSIM_OK;
  } catch (...) {
    return fail(FSIM_ERR_PARSE);
  }
}

int fsim_scenario_load_string(const char* json_text, fsim_scenario_t** out) {
  if (!json_text || !out) return invalid("null text/out");
  try {
    *out = new fsim_scenario{load_scenario_string(json_text)};
    return FSIM_OK;
  } catch (...) {
    return fail(FSIM_ERR_PARSE);
  }
}

void fsim_scenario_free(fsim_scenario_t* s) { delete s; }

const char* fsim_scenario_name(const fsim_scenario_t* s) {
  return s ? s->s.name.c_str() : "";
}

int fsim_scenario_set_seed(fsim_scenario_t* s, uint64_t seed) {
  if (!s) return invalid("null scenario");
  s->s.seed = seed;
  return FSIM_OK;
}

int fsim_scenario_set_routing(fsim_scenario_t* s, const char* policy) {
  if (!s || !policy) return invalid("null scenario/policy");
  std::string p = policy;
  if (p == "hbr") {
    s->s.routing = RoutingPolicy::kHbr;
  } else if (p == "pbr") {
    s->s.routing = RoutingPolicy::kPbr;
  } else {
    return invalid("routing policy must be hbr or pbr");
  }
  return FSIM_OK;
}

int fsim_scenario_validate(const fsim_scenario_t* s, char** out_json) {
  if (!s || !out_json) return invalid("null scenario/out");
  try {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Violation& v : validate_scenario(s->s)) {
      arr.push_back({{"code", v.code},
                     {"subject", v.subject},
                     {"detail", v.detail}});
    }
    *out_json = dup_string(arr.dump(2));
    return *out_json ? FSIM_OK : FSIM_ERR_RUNTIME;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

int fsim_scenario_run(const fsim_scenario_t* s, fsim_report_t** out) {
  if (!s || !out) return invalid("null scenario/out");
  try {
    *out = new fsim_report{run_scenario(s->s)};
    return FSIM_OK;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

int fsim_preset_count(void) {
  return static_cast<int>(presets().size());
}

const char* fsim_preset_name(int index) {
  const auto& p = presets();
  if (index < 0 || index >= static_cast<int>(p.size())) return nullptr;
  return p[static_cast<std::size_t>(index)].name;
}

int fsim_preset_load(const char* name, fsim_scenario_t** out) {
  if (!name || !out) return invalid("null name/out");
  const char* text = preset_text(name);
  if (!text) {
    g_last_error = std::string("unknown-preset: no preset named '") + name + "'";
    return FSIM_ERR_INVALID;
  }
  return fsim_scenario_load_string(text, out);
}

void fsim_report_free(fsim_report_t* r) { delete r; }

int fsim_report_json(const fsim_report_t* r, char** out_json) {
  if (!r || !out_json) return invalid("null report/out");
  try {
    *out_json = dup_string(r->r.to_json().dump(2));
    return *out_json ? FSIM_OK : FSIM_ERR_RUNTIME;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

int fsim_report_csv(const fsim_report_t* r, char** out_csv) {
  if (!r || !out_csv) return invalid("null report/out");
  try {
    *out_csv = dup_string(r->r.to_csv());
    return *out_csv ? FSIM_OK : FSIM_ERR_RUNTIME;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

int fsim_report_write(const fsim_report_t* r, const char* path,
                      const char* format) {
  if (!r || !path || !format) return invalid("null report/path/format");
  std::string fmt = format;
  if (fmt != "json" && fmt != "csv") return invalid("format must be json or csv");
  try {
    std::ofstream out(path);
    if (!out) {
      g_last_error = std::string("no-file: cannot write '") + path + "'";
      return FSIM_ERR_RUNTIME;
    }
    out << (fmt == "json" ? r->r.to_json().dump(2) + "\n" : r->r.to_csv());
    return out.good() ? FSIM_OK : FSIM_ERR_RUNTIME;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

int fsim_report_load_json(const char* json_text, fsim_report_t** out) {
  if (!json_text || !out) return invalid("null text/out");
  try {
    *out = new fsim_report{
        RunReport::from_json(nlohmann::json::parse(json_text))};
    return FSIM_OK;
  } catch (...) {
    return fail(FSIM_ERR_PARSE);
  }
}

int64_t fsim_report_makespan_ns(const fsim_report_t* r) {
  return r ? r->r.makespan_ns : -1;
}

int fsim_report_compare(const fsim_report_t* baseline,
                        const fsim_report_t* candidate, char** out_json) {
  if (!baseline || !candidate || !out_json) {
    return invalid("null report/out");
  }
  try {
    Comparison c = compare(baseline->r, candidate->r);
    *out_json = dup_string(c.to_json().dump(2));
    return *out_json ? FSIM_OK : FSIM_ERR_RUNTIME;
  } catch (...) {
    return fail(FSIM_ERR_RUNTIME);
  }
}

void fsim_string_free(char* s) { delete[] s; }

}  // extern "C"
