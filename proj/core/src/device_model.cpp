#include "mgb/device_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mgb/error.hpp"

namespace mgb {

namespace {

constexpr std::uint32_t kUnbounded = std::numeric_limits<std::uint32_t>::max();

std::uint32_t clamp32(std::uint64_t v) { return static_cast<std::uint32_t>(std::min<std::uint64_t>(v, kUnbounded)); }

// Blocks of `shape` that still fit next to `used`.
std::uint32_t residual_capacity(const DeviceSpec& spec, const SmUsage& used, const BlockShape& shape) {
  if (shape.warps == 0 || shape.warps > spec.max_warps_per_sm) return 0;
  std::uint32_t cap = spec.max_tbs_per_sm - std::min(used.tbs, spec.max_tbs_per_sm);
  cap = std::min(cap, (spec.max_warps_per_sm - std::min(used.warps, spec.max_warps_per_sm)) / shape.warps);
  if (shape.regs > 0) {
    cap = std::min(cap, clamp32((spec.regs_per_sm - std::min(used.regs, spec.regs_per_sm)) / shape.regs));
  }
  if (shape.smem > 0) {
    cap = std::min(cap, clamp32((spec.smem_per_sm_bytes - std::min(used.smem, spec.smem_per_sm_bytes)) / shape.smem));
  }
  return cap;
}

DeviceSpec spec_from_json(const nlohmann::json& j) {
  DeviceSpec s;
  if (j.contains("preset")) {
    auto p = DeviceSpec::preset(j.at("preset").get<std::string>());
    if (!p) throw ConfigError("unknown device preset '" + j.at("preset").get<std::string>() + "'");
    s = *p;
  }
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  if (j.contains("sm_count")) s.sm_count = j.at("sm_count").get<std::uint32_t>();
  if (j.contains("max_warps_per_sm")) s.max_warps_per_sm = j.at("max_warps_per_sm").get<std::uint32_t>();
  if (j.contains("max_tbs_per_sm")) s.max_tbs_per_sm = j.at("max_tbs_per_sm").get<std::uint32_t>();
  if (j.contains("regs_per_sm")) s.regs_per_sm = j.at("regs_per_sm").get<std::uint64_t>();
  if (j.contains("smem_per_sm_bytes")) s.smem_per_sm_bytes = j.at("smem_per_sm_bytes").get<Bytes>();
  if (j.contains("mem_bytes")) s.mem_bytes = j.at("mem_bytes").get<Bytes>();
  if (j.contains("mem_gb")) s.mem_bytes = static_cast<Bytes>(j.at("mem_gb").get<double>() * static_cast<double>(kGiB));
  s.validate();
  return s;
}

std::vector<DeviceSpec> parse_shorthand(std::string_view text) {
  std::vector<DeviceSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = text.substr(start, end - start);
    auto colon = item.find(':');
    auto name = item.substr(0, colon);
    std::uint32_t count = 1;
    if (colon != std::string_view::npos) {
      auto num = item.substr(colon + 1);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), count);
      if (ec != std::errc{} || ptr != num.data() + num.size() || count == 0) {
        throw ConfigError("bad device count in '" + std::string(item) + "'");
      }
    }
    auto spec = DeviceSpec::preset(name);
    if (!spec) throw ConfigError("unknown device preset '" + std::string(name) + "'");
    out.insert(out.end(), count, *spec);
    start = end + 1;
  }
  return out;
}

}  // namespace

void DeviceSpec::validate() const {
  if (sm_count == 0) throw ConfigError("device '" + name + "': sm_count must be positive");
  if (max_warps_per_sm == 0) throw ConfigError("device '" + name + "': max_warps_per_sm must be positive");
  if (max_tbs_per_sm == 0) throw ConfigError("device '" + name + "': max_tbs_per_sm must be positive");
  if (mem_bytes == 0) throw ConfigError("device '" + name + "': mem_bytes must be positive");
}

DeviceSpec DeviceSpec::p100() {
  return DeviceSpec{"p100", 56, 64, 32, 65536, 64 * 1024, 16 * kGiB};
}

DeviceSpec DeviceSpec::v100() {
  return DeviceSpec{"v100", 80, 64, 32, 65536, 96 * 1024, 16 * kGiB};
}

std::optional<DeviceSpec> DeviceSpec::preset(std::string_view name) {
  if (name == "p100") return p100();
  if (name == "v100") return v100();
  return std::nullopt;
}

std::vector<DeviceSpec> parse_device_inventory(std::string_view text) {
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw ConfigError("empty device inventory");
  std::vector<DeviceSpec> out;
  if (text[first] != '[' && text[first] != '{') {
    out = parse_shorthand(text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1));
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("device inventory: ") + e.what());
    }
    if (!j.is_array()) j = nlohmann::json::array({j});
    try {
      for (const auto& item : j) {
        const auto count = item.value("count", 1u);
        out.insert(out.end(), count, spec_from_json(item));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("device inventory: ") + e.what());
    }
  }
  if (out.empty()) throw ConfigError("device inventory has no devices");
  return out;
}

std::vector<DeviceSpec> load_device_inventory(const std::string& arg) {
  std::ifstream in(arg);
  if (!in) return parse_device_inventory(arg);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_device_inventory(ss.str());
}

BlockShape BlockShape::of(const ResourceRequest& r) {
  return BlockShape{r.warps_per_block, std::uint64_t{r.regs_per_thread} * r.threads_per_block, r.smem_per_block};
}

std::uint32_t occupancy_limit_per_sm(const DeviceSpec& spec, const ResourceRequest& r) {
  return residual_capacity(spec, SmUsage{}, BlockShape::of(r));
}

DeviceState::DeviceState(DeviceSpec spec) : spec_(std::move(spec)), free_mem_(spec_.mem_bytes), sms_(spec_.sm_count) {
  spec_.validate();
}

std::optional<PlacementPlan> DeviceState::try_place_blocks(const ResourceRequest& r) const {
  const auto shape = BlockShape::of(r);
  const std::size_t n = sms_.size();
  std::vector<std::uint32_t> cap(n);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cap[i] = residual_capacity(spec_, sms_[i], shape);
    total += cap[i];
  }
  const std::uint64_t want = r.thread_blocks;
  if (want == 0 || total < want) return std::nullopt;

  // Round-robin dispatch fills SMs in passes starting at the cursor. Find the
  // number of complete passes, then hand out the remainder in cursor order.
  auto placed_after = [&](std::uint64_t passes) {
    std::uint64_t s = 0;
    for (auto c : cap) s += std::min<std::uint64_t>(c, passes);
    return s;
  };
  std::uint64_t lo = 0;
  std::uint64_t hi = *std::max_element(cap.begin(), cap.end());
  while (lo < hi) {
    const std::uint64_t mid = (lo + hi + 1) / 2;
    if (placed_after(mid) <= want) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const std::uint64_t passes = lo;
  std::uint64_t remaining = want - placed_after(passes);

  PlacementPlan plan;
  plan.shape = shape;
  plan.version = version_;
  plan.tbs_per_sm.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.tbs_per_sm[i] = static_cast<std::uint32_t>(std::min<std::uint64_t>(cap[i], passes));
  std::size_t last = 0;
  if (remaining > 0) {
    for (std::size_t k = 0; k < n && remaining > 0; ++k) {
      const std::size_t i = (rr_cursor_ + k) % n;
      if (cap[i] > passes) {
        ++plan.tbs_per_sm[i];
        --remaining;
        last = i;
      }
    }
  } else {
    // The final block went to the last SM visited in the final full pass.
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = (rr_cursor_ + k) % n;
      if (cap[i] >= passes) last = i;
    }
  }
  plan.final_cursor = static_cast<std::uint32_t>((last + 1) % n);
  return plan;
}

void DeviceState::commit_placement(const PlacementPlan& plan, TenantId tenant) {
  if (plan.version != version_) throw ContractViolation("stale placement plan for device '" + spec_.name + "'");
  if (plan.tbs_per_sm.size() != sms_.size()) throw ContractViolation("placement plan does not match device shape");
  auto& t = resident_[tenant];
  if (!t.tbs_per_sm.empty()) throw ContractViolation("tenant " + std::to_string(tenant) + " already has a placement");
  for (std::size_t i = 0; i < sms_.size(); ++i) {
    const auto k = plan.tbs_per_sm[i];
    sms_[i].tbs += k;
    sms_[i].warps += k * plan.shape.warps;
    sms_[i].regs += k * plan.shape.regs;
    sms_[i].smem += k * plan.shape.smem;
  }
  t.tbs_per_sm = plan.tbs_per_sm;
  t.shape = plan.shape;
  rr_cursor_ = plan.final_cursor;
  ++version_;
}

bool DeviceState::reserve_memory(TenantId tenant, Bytes bytes) {
  if (bytes > free_mem_) return false;
  resident_[tenant].mem += bytes;
  free_mem_ -= bytes;
  ++version_;
  return true;
}

Tenancy& DeviceState::tenancy(TenantId tenant) {
  auto it = resident_.find(tenant);
  if (it == resident_.end()) {
    throw ContractViolation("tenant " + std::to_string(tenant) + " is not resident on device '" + spec_.name + "'");
  }
  return it->second;
}

void DeviceState::release_memory(TenantId tenant, Bytes bytes) {
  auto& t = tenancy(tenant);
  if (bytes > t.mem) throw ContractViolation("releasing more memory than tenant " + std::to_string(tenant) + " holds");
  t.mem -= bytes;
  free_mem_ += bytes;
  ++version_;
}

void DeviceState::add_warps(TenantId tenant, std::uint64_t warps) {
  resident_[tenant].warps += warps;
  in_use_warps_ += warps;
  ++version_;
}

Tenancy DeviceState::release_task(TenantId tenant) {
  Tenancy t = tenancy(tenant);
  resident_.erase(tenant);
  free_mem_ += t.mem;
  in_use_warps_ -= t.warps;
  for (std::size_t i = 0; i < t.tbs_per_sm.size(); ++i) {
    const auto k = t.tbs_per_sm[i];
    sms_[i].tbs -= k;
    sms_[i].warps -= k * t.shape.warps;
    sms_[i].regs -= k * t.shape.regs;
    sms_[i].smem -= k * t.shape.smem;
  }
  ++version_;
  return t;
}

}  // namespace mgb
