// SPDX-License-Identifier: Apache-2.0
#include "presets.hpp"

#include "preset_data.inc"

namespace fabricsim {

const std::vector<Preset>& presets() {
  static const std::vector<Preset> kPresets = {
      {"rag_cxl_vs_rdma.cxl", k_scenarios_rag_cxl_vs_rdma_cxl_json},
      {"rag_cxl_vs_rdma.rdma", k_scenarios_rag_cxl_vs_rdma_rdma_json},
      {"dlrm_init_infer.cxl", k_scenarios_dlrm_init_infer_cxl_json},
      {"dlrm_init_infer.rdma", k_scenarios_dlrm_init_infer_rdma_json},
      {"mpi_halo_shared_vs_rdma.cxl",
       k_scenarios_mpi_halo_shared_vs_rdma_cxl_json},
      {"mpi_halo_shared_vs_rdma.rdma",
       k_scenarios_mpi_halo_shared_vs_rdma_rdma_json},
      {"supercluster_2cluster.cxl", k_scenarios_supercluster_2cluster_cxl_json},
      {"supercluster_2cluster.rdma",
       k_scenarios_supercluster_2cluster_rdma_json},
  };
  return kPresets;
}

const char* preset_text(const std::string& name) {
  for (const Preset& p : presets()) {
    if (name == p.name) return p.text;
  }
  return nullptr;
}

}  // namespace fabricsim
