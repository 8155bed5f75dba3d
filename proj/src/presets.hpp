// SPDX-License-Identifier: Apache-2.0
//
// Scenario presets embedded at build time so runs don't depend on the
// working directory. Paired .cxl/.rdma presets share a workload section and
// therefore compare cleanly.
#pragma once

#include <string>
#include <vector>

namespace fabricsim {

struct Preset {
  const char* name;
  const char* text;
};

const std::vector<Preset>& presets();

// nullptr when no preset has that name.
const char* preset_text(const std::string& name);

}  // namespace fabricsim
