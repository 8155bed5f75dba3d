// SPDX-License-Identifier: Apache-2.0
#include "fabric.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <set>

#include "error.hpp"

namespace fabricsim {

std::vector<LinkTech> default_link_profiles() {
  std::vector<LinkTech> t;
  // CXL 3.0, PBR flits: 128 GB/s unidirectional (x16 @ 64 GT/s), coherent,
  // multi-level switching, up to 4096 devices per fabric domain.
  t.push_back(LinkTech{.name = "CXL3",
                       .bytes_per_us = 128000,
                       .base_link_latency_ns = 10,
                       .switch_hop_latency_ns = 150,
                       .flit_bytes = 256,
                       .header_bytes = 32,
                       .coherent = true,
                       .single_hop_only = false,
                       .max_endpoints = 4096,
                       .framing = Framing::kGeneric,
                       .cls = TechClass::kCxl});
  // Same electricals, 68B flit path (64B payload + 4B overhead).
  t.push_back(LinkTech{.name = "CXL3-HBR",
                       .bytes_per_us = 128000,
                       .base_link_latency_ns = 10,
                       .switch_hop_latency_ns = 150,
                       .flit_bytes = 68,
                       .header_bytes = 4,
                       .coherent = true,
                       .single_hop_only = false,
                       .max_endpoints = 4096,
                       .framing = Framing::kGeneric,
                       .cls = TechClass::kCxl});
  // UALink: 100 GB/s per x4 port, 640B flits, non-coherent, one switch hop,
  // up to 1024 accelerators per pod.
  t.push_back(LinkTech{.name = "UALink",
                       .bytes_per_us = 100000,
                       .base_link_latency_ns = 50,
                       .switch_hop_latency_ns = 600,
                       .flit_bytes = 640,
                       .header_bytes = 64,
                       .coherent = false,
                       .single_hop_only = true,
                       .max_endpoints = 1024,
                       .framing = Framing::kGeneric,
                       .cls = TechClass::kXlink});
  // NVLink 5: 50 GB/s per x2 link, packetized (16B header flit + 2..16 16B
  // data flits, i.e. 48..272B packets), single switch hop, 576 GPU domain.
  t.push_back(LinkTech{.name = "NVLink",
                       .bytes_per_us = 50000,
                       .base_link_latency_ns = 25,
                       .switch_hop_latency_ns = 300,
                       .flit_bytes = 272,
                       .header_bytes = 16,
                       .coherent = false,
                       .single_hop_only = true,
                       .max_endpoints = 576,
                       .framing = Framing::kNvlinkPacket,
                       .cls = TechClass::kXlink});
  // Coherent CPU<->GPU chip-to-chip link (450 GB/s per direction).
  t.push_back(LinkTech{.name = "NVLinkC2C",
                       .bytes_per_us = 450000,
                       .base_link_latency_ns = 20,
                       .switch_hop_latency_ns = 300,
                       .flit_bytes = 272,
                       .header_bytes = 16,
                       .coherent = true,
                       .single_hop_only = true,
                       .max_endpoints = 576,
                       .framing = Framing::kNvlinkPacket,
                       .cls = TechClass::kC2c});
  // Scale-out NIC: 800 Gb/s serialization, framing not modeled (software
  // stack overhead dominates and is charged separately per transfer).
  t.push_back(LinkTech{.name = "RDMA-NIC",
                       .bytes_per_us = 100000,
                       .base_link_latency_ns = 0,
                       .switch_hop_latency_ns = 500,
                       .flit_bytes = 4096,
                       .header_bytes = 0,
                       .coherent = false,
                       .single_hop_only = false,
                       .max_endpoints = 1u << 30,
                       .framing = Framing::kRaw,
                       .cls = TechClass::kNic});
  return t;
}

const char* to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::kAccelerator: return "accelerator";
    case DeviceKind::kHostCpu: return "host";
    case DeviceKind::kMemoryTray: return "tray";
    case DeviceKind::kCxlSwitch: return "cxl_switch";
    case DeviceKind::kXlinkSwitch: return "xlink_switch";
    case DeviceKind::kBridge: return "bridge";
    case DeviceKind::kNic: return "nic";
  }
  return "?";
}

static DeviceKind kind_from_string(const std::string& s) {
  if (s == "accelerator") return DeviceKind::kAccelerator;
  if (s == "host") return DeviceKind::kHostCpu;
  if (s == "tray") return DeviceKind::kMemoryTray;
  if (s == "cxl_switch") return DeviceKind::kCxlSwitch;
  if (s == "xlink_switch") return DeviceKind::kXlinkSwitch;
  if (s == "bridge") return DeviceKind::kBridge;
  if (s == "nic") return DeviceKind::kNic;
  raise("bad-params", "unknown device kind '" + s + "'");
}

Fabric::Fabric() : techs_(default_link_profiles()) {}

DeviceId Fabric::add_device(Device d) {
  d.id = static_cast<DeviceId>(devices_.size());
  if (d.name.empty()) {
    d.name = std::string(to_string(d.kind)) + std::to_string(d.id);
  }
  devices_.push_back(std::move(d));
  ports_.emplace_back();
  reserved_.push_back(0);
  removed_.push_back(false);
  return devices_.back().id;
}

LinkId Fabric::add_link(DeviceId a, DeviceId b, int tech, std::uint32_t width) {
  if (!alive(a) || !alive(b)) raise("unknown-device", "link endpoint missing");
  if (a == b) raise("bad-params", "self link on device " + device(a).name);
  if (tech < 0 || tech >= static_cast<int>(techs_.size())) {
    raise("bad-params", "bad tech index");
  }
  // Scale-up islands talk their own technology internally; anything that
  // spans two clusters has to be the composable (CXL) fabric or a NIC.
  const Device& da = device(a);
  const Device& db = device(b);
  TechClass cls = techs_[tech].cls;
  if (da.cluster >= 0 && db.cluster >= 0 && da.cluster != db.cluster &&
      (cls == TechClass::kXlink || cls == TechClass::kC2c)) {
    raise("inter-cluster-xlink",
          "link " + da.name + "<->" + db.name +
              " spans clusters; inter-cluster links must be CXL");
  }
  LinkId id = static_cast<LinkId>(links_.size());
  links_.push_back(Link{id, a, b, tech, width});
  link_removed_.push_back(false);
  ports_[a].push_back(Port{id, b});
  ports_[b].push_back(Port{id, a});
  return id;
}

LinkId Fabric::add_link(DeviceId a, DeviceId b, const std::string& tech,
                        std::uint32_t width) {
  return add_link(a, b, require_tech(tech), width);
}

void Fabric::remove_device(DeviceId id) {
  if (!alive(id)) raise("unknown-device", "no device " + std::to_string(id));
  const Device& d = device(id);
  bool leaf = ports_[id].size() <= 1;
  if (d.kind != DeviceKind::kMemoryTray && !leaf) {
    raise("bad-params", "only memory trays or leaf devices are removable");
  }
  if (reserved_[id] > 0) {
    raise("tray-in-use", d.name + " still holds " +
                             std::to_string(reserved_[id]) +
                             " placed/allocated bytes");
  }
  for (const Port& p : ports_[id]) {
    link_removed_[p.link] = true;
    auto& peer_ports = ports_[p.peer];
    std::erase_if(peer_ports, [&](const Port& q) { return q.link == p.link; });
  }
  ports_[id].clear();
  removed_[id] = true;
}

int Fabric::tech_index(const std::string& name) const {
  for (std::size_t i = 0; i < techs_.size(); ++i) {
    if (techs_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Fabric::require_tech(const std::string& name) const {
  int idx = tech_index(name);
  if (idx < 0) raise("unknown-tech", "no link technology '" + name + "'");
  return idx;
}

const Device& Fabric::device(DeviceId id) const {
  if (id >= devices_.size()) raise("unknown-device", std::to_string(id));
  return devices_[id];
}

Device& Fabric::device_mutable(DeviceId id) {
  if (id >= devices_.size()) raise("unknown-device", std::to_string(id));
  return devices_[id];
}

const Link& Fabric::link(LinkId id) const {
  if (id >= links_.size()) raise("bad-params", "no link " + std::to_string(id));
  return links_[id];
}

const std::vector<Port>& Fabric::ports(DeviceId id) const {
  if (id >= ports_.size()) raise("unknown-device", std::to_string(id));
  return ports_[id];
}

DeviceId Fabric::find_device(const std::string& name) const {
  for (const Device& d : devices_) {
    if (!removed_[d.id] && d.name == name) return d.id;
  }
  return kNoDevice;
}

DeviceId Fabric::require_device(const std::string& name) const {
  DeviceId id = find_device(name);
  if (id == kNoDevice) raise("unknown-device", "no device named '" + name + "'");
  return id;
}

std::size_t Fabric::count(DeviceKind k) const {
  std::size_t n = 0;
  for (const Device& d : devices_) {
    if (!removed_[d.id] && d.kind == k) ++n;
  }
  return n;
}

std::uint64_t Fabric::link_bandwidth(const Link& l) const {
  const LinkTech& t = techs_[l.tech];
  return t.bytes_per_us * l.width * t.links_per_device;
}

void Fabric::reserve_bytes(DeviceId id, std::uint64_t bytes) {
  if (!alive(id)) raise("unknown-device", std::to_string(id));
  reserved_[id] += bytes;
}

void Fabric::release_bytes(DeviceId id, std::uint64_t bytes) {
  if (!alive(id)) raise("unknown-device", std::to_string(id));
  reserved_[id] = bytes > reserved_[id] ? 0 : reserved_[id] - bytes;
}

std::uint64_t Fabric::reserved_bytes(DeviceId id) const {
  if (!alive(id)) raise("unknown-device", std::to_string(id));
  return reserved_[id];
}

std::uint64_t Fabric::free_bytes(DeviceId id) const {
  const Device& d = device(id);
  std::uint64_t cap = d.kind == DeviceKind::kAccelerator ? d.local_mem_bytes
                                                         : d.capacity_bytes;
  return cap > reserved_[id] ? cap - reserved_[id] : 0;
}

// ---------------------------------------------------------------------------
// validation

namespace {

bool is_switch(DeviceKind k) {
  return k == DeviceKind::kCxlSwitch || k == DeviceKind::kXlinkSwitch;
}

}  // namespace

std::vector<Violation> Fabric::validate() const {
  std::vector<Violation> out;

  // Per-host root-port limits: walk the CXL subtree reachable from each host
  // and count coherently attached accelerators and memory devices.
  std::uint64_t mem_limit = cxl_mode_ == CxlMode::kV3 ? 4096 : 256;
  for (const Device& host : devices_) {
    if (removed_[host.id] || host.kind != DeviceKind::kHostCpu) continue;
    std::vector<bool> seen(devices_.size(), false);
    std::queue<DeviceId> q;
    q.push(host.id);
    seen[host.id] = true;
    std::uint64_t accels = 0, mems = 0;
    bool has_switch = false;
    while (!q.empty()) {
      DeviceId cur = q.front();
      q.pop();
      for (const Port& p : ports_[cur]) {
        if (techs_[links_[p.link].tech].cls != TechClass::kCxl) continue;
        if (seen[p.peer]) continue;
        seen[p.peer] = true;
        const Device& peer = devices_[p.peer];
        if (peer.kind == DeviceKind::kAccelerator) ++accels;
        if (peer.kind == DeviceKind::kMemoryTray) ++mems;
        if (peer.kind == DeviceKind::kCxlSwitch) has_switch = true;
        q.push(p.peer);
      }
    }
    std::uint64_t host_mem_limit = has_switch ? mem_limit : 1;
    if (accels > 256) {
      out.push_back({"accel-per-root-port", host.name,
                     std::to_string(accels) + " coherent accelerators behind "
                     "one root port (max 256)"});
    }
    if (mems > host_mem_limit) {
      out.push_back({"mem-per-root-port", host.name,
                     std::to_string(mems) + " memory devices behind one root "
                     "port (max " + std::to_string(host_mem_limit) + ")"});
    }
  }

  // Scale-up island checks. Islands are the connected components over
  // accelerator-native links (XLink + chip-to-chip), independent of the
  // cluster labels composition assigned.
  std::vector<DeviceId> comp(devices_.size());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = static_cast<DeviceId>(i);
  std::function<DeviceId(DeviceId)> find = [&](DeviceId x) {
    while (comp[x] != x) x = comp[x] = comp[comp[x]];
    return x;
  };
  for (const Link& l : links_) {
    if (link_removed_[l.id]) continue;
    TechClass cls = techs_[l.tech].cls;
    if (cls != TechClass::kXlink && cls != TechClass::kC2c) continue;
    DeviceId ra = find(l.a), rb = find(l.b);
    if (ra != rb) comp[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<DeviceId, std::vector<DeviceId>> clusters;
  for (const Device& d : devices_) {
    if (!removed_[d.id]) clusters[find(d.id)].push_back(d.id);
  }
  for (const auto& [root, members] : clusters) {
    if (members.size() < 2) continue;
    std::string subject = "island:" + devices_[root].name;
    // Which scale-up technologies appear inside this island?
    std::set<int> xlink_techs;
    for (DeviceId id : members) {
      for (const Port& p : ports_[id]) {
        const Link& l = links_[p.link];
        if (techs_[l.tech].cls == TechClass::kXlink) xlink_techs.insert(l.tech);
      }
    }
    if (xlink_techs.size() > 1) {
      out.push_back({"mixed-xlink-tech", subject,
                     "cluster mixes multiple scale-up link technologies"});
    }
    for (int ti : xlink_techs) {
      const LinkTech& t = techs_[ti];
      // Endpoint census for the domain-size limits (bridges relay, they do
      // not consume an endpoint slot).
      std::uint64_t endpoints = 0;
      for (DeviceId id : members) {
        const Device& d = devices_[id];
        if (is_switch(d.kind) || d.kind == DeviceKind::kNic ||
            d.kind == DeviceKind::kBridge) {
          continue;
        }
        bool attached = false;
        for (const Port& p : ports_[id]) {
          if (links_[p.link].tech == ti) attached = true;
        }
        if (attached) ++endpoints;
      }
      if (endpoints > t.max_endpoints) {
        std::string code = t.name == "UALink" ? "ualink-cluster-size"
                          : t.name == "NVLink" ? "nvlink-domain-size"
                                               : "xlink-cluster-size";
        out.push_back({code, subject,
                       std::to_string(endpoints) + " endpoints on " + t.name +
                           " (max " + std::to_string(t.max_endpoints) + ")"});
      }
      if (!t.single_hop_only) continue;
      // Single-hop rule: every endpoint pair must be reachable through at
      // most one switch. BFS per endpoint over this tech's links, counting
      // switch traversals.
      std::vector<DeviceId> eps;
      for (DeviceId id : members) {
        const Device& d = devices_[id];
        if (is_switch(d.kind) || d.kind == DeviceKind::kNic) continue;
        for (const Port& p : ports_[id]) {
          if (links_[p.link].tech == ti) {
            eps.push_back(id);
            break;
          }
        }
      }
      bool multi_hop = false;
      for (DeviceId src : eps) {
        if (multi_hop) break;
        // Dijkstra-light: cost = switches traversed.
        std::map<DeviceId, int> cost;
        std::priority_queue<std::pair<int, DeviceId>,
                            std::vector<std::pair<int, DeviceId>>,
                            std::greater<>>
            pq;
        cost[src] = 0;
        pq.push({0, src});
        while (!pq.empty()) {
          auto [c, cur] = pq.top();
          pq.pop();
          if (c != cost[cur]) continue;
          for (const Port& p : ports_[cur]) {
            if (links_[p.link].tech != ti) continue;
            int nc = c + (is_switch(devices_[p.peer].kind) ? 1 : 0);
            auto it = cost.find(p.peer);
            if (it == cost.end() || nc < it->second) {
              cost[p.peer] = nc;
              pq.push({nc, p.peer});
            }
          }
        }
        for (DeviceId dst : eps) {
          if (dst == src) continue;
          auto it = cost.find(dst);
          if (it != cost.end() && it->second > 1) {
            multi_hop = true;
            break;
          }
        }
      }
      if (multi_hop) {
        out.push_back({"xlink-multi-hop", subject,
                       t.name + " reaches some endpoints only through more "
                       "than one switch"});
      }
    }
  }

  // Multi-level CXL switching requires the v3 fabric.
  if (cxl_mode_ == CxlMode::kV2) {
    for (const Link& l : links_) {
      if (link_removed_[l.id]) continue;
      if (techs_[l.tech].cls != TechClass::kCxl) continue;
      if (devices_[l.a].kind == DeviceKind::kCxlSwitch &&
          devices_[l.b].kind == DeviceKind::kCxlSwitch) {
        out.push_back({"multilevel-switching", devices_[l.a].name,
                       "cascaded CXL switches need the v3 fabric"});
        break;
      }
    }
    if (shared_memory_requested_) {
      out.push_back({"sharing-unsupported", "fabric",
                     "shared (multi-writer) regions need the v3 fabric"});
    }
  }

  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.code, a.subject) < std::tie(b.code, b.subject);
  });
  return out;
}

bool Fabric::operator==(const Fabric& other) const {
  auto live_devices = [](const Fabric& f) {
    std::vector<Device> v;
    for (const Device& d : f.devices_) {
      if (!f.removed_[d.id]) v.push_back(d);
    }
    return v;
  };
  auto live_links = [](const Fabric& f) {
    std::vector<Link> v;
    for (const Link& l : f.links_) {
      if (!f.link_removed_[l.id]) v.push_back(l);
    }
    return v;
  };
  auto dev_eq = [](const Device& a, const Device& b) {
    return a.id == b.id && a.kind == b.kind && a.name == b.name &&
           a.capacity_bytes == b.capacity_bytes &&
           a.local_mem_bytes == b.local_mem_bytes &&
           a.local_mem_bytes_per_us == b.local_mem_bytes_per_us &&
           a.mem_latency_ns == b.mem_latency_ns && a.cluster == b.cluster &&
           a.node == b.node && a.nic == b.nic;
  };
  auto av = live_devices(*this), bv = live_devices(other);
  if (av.size() != bv.size()) return false;
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!dev_eq(av[i], bv[i])) return false;
  }
  auto al = live_links(*this), bl = live_links(other);
  if (al.size() != bl.size()) return false;
  for (std::size_t i = 0; i < al.size(); ++i) {
    if (al[i].a != bl[i].a || al[i].b != bl[i].b || al[i].tech != bl[i].tech ||
        al[i].width != bl[i].width) {
      return false;
    }
  }
  return cxl_mode_ == other.cxl_mode_;
}

// ---------------------------------------------------------------------------
// serialization

nlohmann::ordered_json Fabric::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "custom";
  j["cxl_mode"] = cxl_mode_ == CxlMode::kV3 ? "v3" : "v2";
  auto& devs = j["devices"] = nlohmann::ordered_json::array();
  std::vector<DeviceId> compact(devices_.size(), kNoDevice);
  DeviceId next = 0;
  for (const Device& d : devices_) {
    if (removed_[d.id]) continue;
    compact[d.id] = next++;
    nlohmann::ordered_json dj;
    dj["kind"] = to_string(d.kind);
    dj["name"] = d.name;
    if (d.capacity_bytes) dj["capacity_bytes"] = d.capacity_bytes;
    if (d.local_mem_bytes) dj["local_mem_bytes"] = d.local_mem_bytes;
    if (d.local_mem_bytes_per_us) {
      dj["local_mem_gbps"] = static_cast<double>(d.local_mem_bytes_per_us) / 1000.0;
    }
    if (d.mem_latency_ns) dj["mem_latency_ns"] = d.mem_latency_ns;
    if (d.cluster >= 0) dj["cluster"] = d.cluster;
    if (d.node >= 0) dj["node"] = d.node;
    devs.push_back(std::move(dj));
  }
  auto& lks = j["links"] = nlohmann::ordered_json::array();
  for (const Link& l : links_) {
    if (link_removed_[l.id]) continue;
    nlohmann::ordered_json lj;
    lj["a"] = devices_[l.a].name;
    lj["b"] = devices_[l.b].name;
    lj["tech"] = techs_[l.tech].name;
    if (l.width != 1) lj["width"] = l.width;
    lks.push_back(std::move(lj));
  }
  auto& nics = j["nics"] = nlohmann::ordered_json::array();
  for (const Device& d : devices_) {
    if (removed_[d.id] || d.nic == kNoDevice) continue;
    nics.push_back({{"device", d.name}, {"nic", devices_[d.nic].name}});
  }
  return j;
}

Fabric Fabric::from_json(const nlohmann::json& j) {
  Fabric f;
  if (j.contains("cxl_mode")) {
    std::string m = j.at("cxl_mode").get<std::string>();
    if (m == "v2") {
      f.set_cxl_mode(CxlMode::kV2);
    } else if (m == "v3") {
      f.set_cxl_mode(CxlMode::kV3);
    } else {
      raise("bad-params", "cxl_mode must be v2 or v3, got '" + m + "'");
    }
  }
  for (const auto& dj : j.value("devices", nlohmann::json::array())) {
    Device d;
    d.kind = kind_from_string(dj.at("kind").get<std::string>());
    d.name = dj.value("name", std::string());
    d.capacity_bytes = dj.value("capacity_bytes", 0ull);
    d.local_mem_bytes = dj.value("local_mem_bytes", 0ull);
    if (dj.contains("local_mem_gbps")) {
      d.local_mem_bytes_per_us =
          gbps_to_bytes_per_us(dj.at("local_mem_gbps").get<double>());
    }
    d.mem_latency_ns = dj.value("mem_latency_ns", 0);
    d.cluster = dj.value("cluster", -1);
    d.node = dj.value("node", -1);
    f.add_device(std::move(d));
  }
  for (const auto& lj : j.value("links", nlohmann::json::array())) {
    f.add_link(f.require_device(lj.at("a").get<std::string>()),
               f.require_device(lj.at("b").get<std::string>()),
               lj.at("tech").get<std::string>(), lj.value("width", 1u));
  }
  for (const auto& nj : j.value("nics", nlohmann::json::array())) {
    DeviceId dev = f.require_device(nj.at("device").get<std::string>());
    DeviceId nic = f.require_device(nj.at("nic").get<std::string>());
    f.device_mutable(dev).nic = nic;
  }
  return f;
}

}  // namespace fabricsim
