#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/task_builder.hpp"

namespace mgb {

inline constexpr Bytes kGiB = Bytes{1} << 30;
inline constexpr Bytes kMiB = Bytes{1} << 20;

struct DeviceSpec {
  std::string name;
  std::uint32_t sm_count = 0;
  std::uint32_t max_warps_per_sm = 64;
  std::uint32_t max_tbs_per_sm = 32;
  std::uint64_t regs_per_sm = 65536;
  Bytes smem_per_sm_bytes = 64 * 1024;
  Bytes mem_bytes = 0;

  bool operator==(const DeviceSpec&) const = default;

  std::uint64_t warp_capacity() const { return std::uint64_t{sm_count} * max_warps_per_sm; }
  /// Throws ConfigError when a field that must be positive is not.
  void validate() const;

  static DeviceSpec p100();
  static DeviceSpec v100();
  static std::optional<DeviceSpec> preset(std::string_view name);
};

/// `p100:2`, `v100:4,p100:1`, or a JSON inventory (a file path or literal
/// array of `{"preset":..,"count":..}` / explicit spec objects).
std::vector<DeviceSpec> parse_device_inventory(std::string_view text);
std::vector<DeviceSpec> load_device_inventory(const std::string& arg);

/// The per-block footprint of a kernel shape on one SM.
struct BlockShape {
  std::uint32_t warps = 0;
  std::uint64_t regs = 0;
  Bytes smem = 0;

  static BlockShape of(const ResourceRequest& r);
};

/// Largest number of blocks of `r`'s shape an empty SM can hold.
std::uint32_t occupancy_limit_per_sm(const DeviceSpec& spec, const ResourceRequest& r);

struct SmUsage {
  std::uint32_t tbs = 0;
  std::uint32_t warps = 0;
  std::uint64_t regs = 0;
  Bytes smem = 0;

  bool operator==(const SmUsage&) const = default;
};

struct PlacementPlan {
  std::vector<std::uint32_t> tbs_per_sm;
  BlockShape shape;
  std::uint32_t final_cursor = 0;
  std::uint64_t version = 0;
};

using TenantId = std::uint64_t;

/// What a task (MGB) or a job (SA/CG) holds on a device.
struct Tenancy {
  Bytes mem = 0;
  std::uint64_t warps = 0;
  std::vector<std::uint32_t> tbs_per_sm;
  BlockShape shape;

  bool operator==(const Tenancy&) const = default;
};

class DeviceState {
 public:
  explicit DeviceState(DeviceSpec spec);

  const DeviceSpec& spec() const { return spec_; }
  Bytes free_mem_bytes() const { return free_mem_; }
  std::uint64_t in_use_warps() const { return in_use_warps_; }
  std::uint32_t rr_cursor() const { return rr_cursor_; }
  std::uint64_t version() const { return version_; }
  const std::vector<SmUsage>& sms() const { return sms_; }
  const std::map<TenantId, Tenancy>& resident() const { return resident_; }
  bool has_tenant(TenantId id) const { return resident_.count(id) > 0; }

  /// Round-robin thread-block dispatch from the cursor. Empty when the blocks
  /// do not all fit; never mutates.
  std::optional<PlacementPlan> try_place_blocks(const ResourceRequest& r) const;

  /// Throws ContractViolation for a plan made against another version.
  void commit_placement(const PlacementPlan& plan, TenantId tenant);

  /// Charges `bytes` to `tenant`, creating its record if needed. Returns false
  /// (and changes nothing) when free memory is short.
  bool reserve_memory(TenantId tenant, Bytes bytes);

  /// Returns part of a tenant's memory.
  void release_memory(TenantId tenant, Bytes bytes);

  void add_warps(TenantId tenant, std::uint64_t warps);

  /// Drops everything the tenant holds. Throws ContractViolation when unknown.
  Tenancy release_task(TenantId tenant);

 private:
  Tenancy& tenancy(TenantId tenant);

  DeviceSpec spec_;
  Bytes free_mem_ = 0;
  std::uint64_t in_use_warps_ = 0;
  std::uint32_t rr_cursor_ = 0;
  std::uint64_t version_ = 0;
  std::vector<SmUsage> sms_;
  std::map<TenantId, Tenancy> resident_;
};

}  // namespace mgb
