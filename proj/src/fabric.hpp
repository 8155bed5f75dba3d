// SPDX-License-Identifier: Apache-2.0
//
// The fabric is an undirected device/link graph annotated with link
// technology profiles, cluster membership and memory capacities. Validation
// checks the structural limits each interconnect generation imposes.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "types.hpp"

namespace fabricsim {

enum class Framing : std::uint8_t {
  kGeneric,       // fixed-size flits: header + payload per flit
  kNvlinkPacket,  // 16B header flit + 2..16 16B data flits per packet
  kRaw,           // no link-layer framing modeled (NIC serialization)
};

// Coarse family used by validation and segmentation rules.
enum class TechClass : std::uint8_t {
  kCxl,    // switched, coherent, multi-level capable
  kXlink,  // accelerator-native scale-up (single-hop domains)
  kC2c,    // coherent chip-to-chip (direct CPU<->GPU)
  kNic,    // scale-out NIC serialization
};

struct LinkTech {
  std::string name;
  std::uint64_t bytes_per_us = 0;  // unidirectional, per physical link
  SimTime base_link_latency_ns = 0;
  SimTime switch_hop_latency_ns = 0;
  std::uint32_t flit_bytes = 0;    // for kNvlinkPacket: max packet size
  std::uint32_t header_bytes = 0;  // per flit (kGeneric) or per packet
  bool coherent = false;
  bool single_hop_only = false;
  std::uint32_t max_endpoints = 1;
  Framing framing = Framing::kGeneric;
  TechClass cls = TechClass::kCxl;
  std::uint32_t links_per_device = 1;  // ganged lanes; scales link bandwidth
};

// Baseline profiles for the modeled interconnects. Latency defaults are
// chosen so single-switch transfers land inside each technology's published
// end-to-end band; bandwidth/flit/scale figures follow the published specs.
std::vector<LinkTech> default_link_profiles();

enum class DeviceKind : std::uint8_t {
  kAccelerator,
  kHostCpu,
  kMemoryTray,
  kCxlSwitch,
  kXlinkSwitch,
  kBridge,
  kNic,
};

const char* to_string(DeviceKind k);

struct Device {
  DeviceId id = 0;
  DeviceKind kind = DeviceKind::kAccelerator;
  std::string name;
  std::uint64_t capacity_bytes = 0;   // pool/DRAM capacity (tray, host)
  std::uint64_t local_mem_bytes = 0;  // accelerator-local memory
  std::uint64_t local_mem_bytes_per_us = 0;
  SimTime mem_latency_ns = 0;  // media latency for reads served here
  int cluster = -1;            // scale-up island membership; -1 = none
  int node = -1;               // physical node grouping (NIC sharing)
  DeviceId nic = kNoDevice;    // NIC serving this device, if any
};

struct Link {
  LinkId id = 0;
  DeviceId a = 0;
  DeviceId b = 0;
  int tech = -1;            // index into Fabric::techs()
  std::uint32_t width = 1;  // parallel physical links aggregated
};

struct Port {
  LinkId link;
  DeviceId peer;
};

enum class CxlMode : std::uint8_t { kV2, kV3 };

struct Violation {
  std::string code;
  std::string subject;
  std::string detail;
};

class Fabric {
 public:
  Fabric();

  // --- construction ---------------------------------------------------
  DeviceId add_device(Device d);  // id/name assigned if unset
  LinkId add_link(DeviceId a, DeviceId b, int tech, std::uint32_t width = 1);
  LinkId add_link(DeviceId a, DeviceId b, const std::string& tech,
                  std::uint32_t width = 1);
  // Removal is restricted to devices nothing references: memory trays and
  // leaf devices without allocations.
  void remove_device(DeviceId id);

  int tech_index(const std::string& name) const;      // -1 if absent
  int require_tech(const std::string& name) const;    // throws unknown-tech
  const LinkTech& tech(int idx) const { return techs_.at(idx); }
  LinkTech& tech_mutable(int idx) { return techs_.at(idx); }
  std::vector<LinkTech>& techs() { return techs_; }
  const std::vector<LinkTech>& techs() const { return techs_; }

  const Device& device(DeviceId id) const;
  Device& device_mutable(DeviceId id);
  // Full id-indexed vectors; entries removed by compose stay as tombstones so
  // ids remain stable. Iterate with alive()/link_alive() checks.
  const std::vector<Device>& devices() const { return devices_; }
  const Link& link(LinkId id) const;
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Port>& ports(DeviceId id) const;
  bool alive(DeviceId id) const {
    return id < devices_.size() && !removed_[id];
  }
  bool link_alive(LinkId id) const {
    return id < links_.size() && !link_removed_[id];
  }

  DeviceId find_device(const std::string& name) const;     // kNoDevice
  DeviceId require_device(const std::string& name) const;  // throws

  std::size_t device_count() const { return devices_.size(); }
  std::size_t count(DeviceKind k) const;

  CxlMode cxl_mode() const { return cxl_mode_; }
  void set_cxl_mode(CxlMode m) { cxl_mode_ = m; }
  bool shared_memory_requested() const { return shared_memory_requested_; }
  void request_shared_memory() { shared_memory_requested_ = true; }

  // Effective unidirectional bandwidth of a link (profile x width x gang).
  std::uint64_t link_bandwidth(const Link& l) const;

  // --- memory accounting (placements and coherent regions) -------------
  RegionId next_region_id() { return next_region_id_++; }
  void reserve_bytes(DeviceId id, std::uint64_t bytes);
  void release_bytes(DeviceId id, std::uint64_t bytes);
  std::uint64_t reserved_bytes(DeviceId id) const;
  std::uint64_t free_bytes(DeviceId id) const;

  // --- checks -----------------------------------------------------------
  // Pure: reports every violated structural limit, sorted by (code, subject).
  std::vector<Violation> validate() const;

  bool operator==(const Fabric& other) const;

  nlohmann::ordered_json to_json() const;
  static Fabric from_json(const nlohmann::json& j);

 private:
  std::vector<Device> devices_;
  std::vector<Link> links_;
  std::vector<std::vector<Port>> ports_;
  std::vector<LinkTech> techs_;
  std::vector<std::uint64_t> reserved_;
  std::vector<bool> removed_;
  std::vector<bool> link_removed_;
  RegionId next_region_id_ = 0;
  CxlMode cxl_mode_ = CxlMode::kV3;
  bool shared_memory_requested_ = false;
};

}  // namespace fabricsim
