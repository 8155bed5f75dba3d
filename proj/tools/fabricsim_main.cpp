// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C API: run scenarios (files or embedded
// presets), validate fabrics, and compare runs. Exit codes: 0 success,
// 1 load/usage error, 2 run error, 3 structural violations found.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fabricsim/fabricsim.h"

namespace {

bool log_enabled() {
  const char* v = std::getenv("FABRICSIM_LOG");
  return v && *v;
}

void logf(const char* fmt, const std::string& arg) {
  if (log_enabled()) std::fprintf(stderr, "fabricsim: %s %s\n", fmt, arg.c_str());
}

int die(const char* stage, int code) {
  std::fprintf(stderr, "fabricsim: %s failed: %s\n", stage, fsim_last_error());
  return code;
}

struct ScenarioArgs {
  std::string file;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string policy;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
  auto* f = cmd->add_option("--scenario,-s", a.file, "scenario JSON file");
  auto* p = cmd->add_option("--preset,-p", a.preset, "embedded preset name");
  f->excludes(p);
  cmd->add_option("--seed", a.seed, "override the scenario seed")
      ->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--policy", a.policy, "routing policy (hbr|pbr)")
      ->check(CLI::IsMember({"hbr", "pbr"}));
}

int load_scenario(const ScenarioArgs& a, fsim_scenario_t** out) {
  int rc;
  if (!a.preset.empty()) {
    rc = fsim_preset_load(a.preset.c_str(), out);
  } else if (!a.file.empty()) {
    rc = fsim_scenario_load_file(a.file.c_str(), out);
  } else {
    std::fprintf(stderr, "fabricsim: need --scenario or --preset\n");
    return 1;
  }
  if (rc != FSIM_OK) return die("load", 1);
  if (a.seed_set) fsim_scenario_set_seed(*out, a.seed);
  if (!a.policy.empty()) fsim_scenario_set_routing(*out, a.policy.c_str());
  return 0;
}

int write_or_print(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    if (!text.empty() && text.back() != '\n') std::fputc('\n', stdout);
    return 0;
  }
  std::FILE* f = std::fopen(out_path.c_str(), "w");
  if (!f) {
    std::fprintf(stderr, "fabricsim: cannot write %s\n", out_path.c_str());
    return 2;
  }
  std::fputs(text.c_str(), f);
  std::fclose(f);
  return 0;
}

int run_one(const ScenarioArgs& a, const std::string& format,
            const std::string& out_path) {
  fsim_scenario_t* s = nullptr;
  int rc = load_scenario(a, &s);
  if (rc != 0) return rc;
  logf("running", fsim_scenario_name(s));
  fsim_report_t* r = nullptr;
  if (fsim_scenario_run(s, &r) != FSIM_OK) {
    fsim_scenario_free(s);
    return die("run", 2);
  }
  char* text = nullptr;
  int grc = format == "csv" ? fsim_report_csv(r, &text)
                            : fsim_report_json(r, &text);
  int out_rc = 2;
  if (grc == FSIM_OK) {
    out_rc = write_or_print(text, out_path);
    fsim_string_free(text);
  } else {
    die("serialize", 2);
  }
  fsim_report_free(r);
  fsim_scenario_free(s);
  return out_rc;
}

int run_sweep(const ScenarioArgs& a, int sweep, const std::string& out_path) {
  struct Result {
    std::uint64_t seed;
    std::int64_t makespan_ns;
    bool ok;
  };
  std::vector<Result> results(static_cast<std::size_t>(sweep));
  std::uint64_t base = a.seed_set ? a.seed : 1;
  std::vector<std::thread> pool;
  for (int i = 0; i < sweep; ++i) {
    pool.emplace_back([&, i] {
      ScenarioArgs worker = a;
      worker.seed = base + static_cast<std::uint64_t>(i);
      worker.seed_set = true;
      fsim_scenario_t* s = nullptr;
      Result res{worker.seed, -1, false};
      if (load_scenario(worker, &s) == 0) {
        fsim_report_t* r = nullptr;
        if (fsim_scenario_run(s, &r) == FSIM_OK) {
          res.makespan_ns = fsim_report_makespan_ns(r);
          res.ok = true;
          fsim_report_free(r);
        }
        fsim_scenario_free(s);
      }
      results[static_cast<std::size_t>(i)] = res;
    });
  }
  for (auto& t : pool) t.join();
  std::string text = "[\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    all_ok = all_ok && results[i].ok;
    text += "  {\"seed\": " + std::to_string(results[i].seed) +
            ", \"ok\": " + (results[i].ok ? "true" : "false") +
            ", \"makespan_ns\": " + std::to_string(results[i].makespan_ns) +
            (i + 1 < results.size() ? "},\n" : "}\n");
  }
  text += "]\n";
  int rc = write_or_print(text, out_path);
  return all_ok ? rc : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"composable memory fabric simulator"};
  app.require_subcommand(1);

  ScenarioArgs run_args;
  std::string run_format = "json";
  std::string run_out;
  int sweep = 0;
  auto* run_cmd = app.add_subcommand("run", "execute a scenario");
  add_scenario_options(run_cmd, run_args);
  run_cmd->add_option("--format,-f", run_format, "output format")
      ->check(CLI::IsMember({"json", "csv"}));
  run_cmd->add_option("--out,-o", run_out, "write the report to a file");
  run_cmd->add_option("--sweep", sweep,
                      "run N seeds (base seed upward) on worker threads")
      ->check(CLI::PositiveNumber);

  ScenarioArgs val_args;
  auto* val_cmd = app.add_subcommand("validate", "check fabric structure");
  add_scenario_options(val_cmd, val_args);

  std::string cmp_baseline, cmp_candidate, cmp_pair, cmp_out;
  ScenarioArgs cmp_args;
  auto* cmp_cmd =
      app.add_subcommand("compare", "compare two runs (baseline vs candidate)");
  cmp_cmd->add_option("--baseline,-b", cmp_baseline, "baseline report JSON");
  cmp_cmd->add_option("--candidate,-c", cmp_candidate, "candidate report JSON");
  cmp_cmd->add_option("--preset-pair", cmp_pair,
                      "run <pair>.rdma as baseline and <pair>.cxl as candidate");
  cmp_cmd->add_option("--seed", cmp_args.seed, "seed for --preset-pair runs")
      ->each([&cmp_args](const std::string&) { cmp_args.seed_set = true; });
  cmp_cmd->add_option("--policy", cmp_args.policy,
                      "routing policy for --preset-pair runs")
      ->check(CLI::IsMember({"hbr", "pbr"}));
  cmp_cmd->add_option("--out,-o", cmp_out, "write the comparison to a file");

  auto* presets_cmd = app.add_subcommand("presets", "list embedded presets");

  CLI11_PARSE(app, argc, argv);

  if (presets_cmd->parsed()) {
    for (int i = 0; i < fsim_preset_count(); ++i) {
      std::printf("%s\n", fsim_preset_name(i));
    }
    return 0;
  }

  if (run_cmd->parsed()) {
    if (sweep > 0) return run_sweep(run_args, sweep, run_out);
    return run_one(run_args, run_format, run_out);
  }

  if (val_cmd->parsed()) {
    fsim_scenario_t* s = nullptr;
    int rc = load_scenario(val_args, &s);
    if (rc != 0) return rc;
    char* text = nullptr;
    if (fsim_scenario_validate(s, &text) != FSIM_OK) {
      fsim_scenario_free(s);
      return die("validate", 2);
    }
    bool clean = std::string(text) == "[]";
    write_or_print(text, "");
    fsim_string_free(text);
    fsim_scenario_free(s);
    return clean ? 0 : 3;
  }

  if (cmp_cmd->parsed()) {
    fsim_report_t* baseline = nullptr;
    fsim_report_t* candidate = nullptr;
    if (!cmp_pair.empty()) {
      for (const char* side : {".rdma", ".cxl"}) {
        ScenarioArgs a = cmp_args;
        a.preset = cmp_pair + side;
        fsim_scenario_t* s = nullptr;
        int rc = load_scenario(a, &s);
        if (rc != 0) return rc;
        logf("running", fsim_scenario_name(s));
        fsim_report_t* r = nullptr;
        if (fsim_scenario_run(s, &r) != FSIM_OK) {
          fsim_scenario_free(s);
          return die("run", 2);
        }
        fsim_scenario_free(s);
        (std::string(side) == ".rdma" ? baseline : candidate) = r;
      }
    } else if (!cmp_baseline.empty() && !cmp_candidate.empty()) {
      auto load_report = [](const std::string& path, fsim_report_t** out) {
        std::FILE* f = std::fopen(path.c_str(), "rb");
        if (!f) return false;
        std::string text;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
        std::fclose(f);
        return fsim_report_load_json(text.c_str(), out) == FSIM_OK;
      };
      if (!load_report(cmp_baseline, &baseline)) return die("load baseline", 1);
      if (!load_report(cmp_candidate, &candidate)) {
        fsim_report_free(baseline);
        return die("load candidate", 1);
      }
    } else {
      std::fprintf(stderr,
                   "fabricsim: compare needs --preset-pair or both "
                   "--baseline and --candidate\n");
      return 1;
    }
    char* text = nullptr;
    int rc = fsim_report_compare(baseline, candidate, &text);
    int out_rc = 2;
    if (rc == FSIM_OK) {
      out_rc = write_or_print(text, cmp_out);
      fsim_string_free(text);
    } else {
      die("compare", 2);
    }
    fsim_report_free(baseline);
    fsim_report_free(candidate);
    return out_rc;
  }

  return 1;
}
