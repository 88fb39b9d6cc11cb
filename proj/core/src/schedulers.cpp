#include "mgb/schedulers.hpp"

#include <charconv>
#include <limits>

#include "mgb/error.hpp"

namespace mgb {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Assign: return "assign";
    case Outcome::Defer: return "defer";
    case Outcome::Reject: return "reject";
  }
  return "?";
}

PolicyConfig PolicyConfig::parse(std::string_view text) {
  PolicyConfig p;
  if (text == "sa") {
    p.kind = PolicyKind::SingleAssignment;
  } else if (text == "mgb-sm") {
    p.kind = PolicyKind::MgbSm;
  } else if (text == "mgb-warps") {
    p.kind = PolicyKind::MgbWarps;
  } else if (text.substr(0, 3) == "cg:") {
    p.kind = PolicyKind::CoreToGpu;
    auto num = text.substr(3);
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), p.cg_ratio);
    if (ec != std::errc{} || ptr != num.data() + num.size() || p.cg_ratio == 0) {
      throw ConfigError("cg ratio must be a positive integer in '" + std::string(text) + "'");
    }
  } else {
    throw ConfigError("unknown scheduling policy '" + std::string(text) + "'");
  }
  return p;
}

std::string PolicyConfig::name() const {
  switch (kind) {
    case PolicyKind::MgbSm: return "mgb-sm";
    case PolicyKind::MgbWarps: return "mgb-warps";
    case PolicyKind::SingleAssignment: return "sa";
    case PolicyKind::CoreToGpu: return "cg:" + std::to_string(cg_ratio);
  }
  return "?";
}

ScheduleDecision sched_mgb_sm(const ScheduleRequest& req, std::vector<DeviceState>& devices) {
  const auto& r = req.resources;
  bool ever = false;
  for (std::uint32_t d = 0; d < devices.size(); ++d) {
    auto& dev = devices[d];
    const auto& spec = dev.spec();
    if (r.mem_bytes <= spec.mem_bytes &&
        std::uint64_t{spec.sm_count} * occupancy_limit_per_sm(spec, r) >= r.thread_blocks) {
      ever = true;
    }
    if (dev.free_mem_bytes() < r.mem_bytes) continue;
    auto plan = dev.try_place_blocks(r);
    if (!plan) continue;
    dev.commit_placement(*plan, req.task_id);
    dev.reserve_memory(req.task_id, r.mem_bytes);
    dev.add_warps(req.task_id, r.total_warps);
    return ScheduleDecision::assign(d);
  }
  if (!ever) return ScheduleDecision::reject("request fits no device even when empty");
  return ScheduleDecision::defer();
}

ScheduleDecision sched_mgb_warps(const ScheduleRequest& req, std::vector<DeviceState>& devices) {
  const auto& r = req.resources;
  bool ever = false;
  std::optional<std::uint32_t> best;
  std::uint64_t min_warps = std::numeric_limits<std::uint64_t>::max();
  for (std::uint32_t d = 0; d < devices.size(); ++d) {
    const auto& dev = devices[d];
    if (r.mem_bytes <= dev.spec().mem_bytes) ever = true;
    if (dev.free_mem_bytes() < r.mem_bytes) continue;
    if (!best || dev.in_use_warps() < min_warps) {
      best = d;
      min_warps = dev.in_use_warps();
    }
  }
  if (!best) {
    if (!ever) return ScheduleDecision::reject("memory request exceeds every device");
    return ScheduleDecision::defer();
  }
  devices[*best].reserve_memory(req.task_id, r.mem_bytes);
  devices[*best].add_warps(req.task_id, r.total_warps);
  return ScheduleDecision::assign(*best);
}

ScheduleDecision sched_sa(const ScheduleRequest&, std::vector<std::uint32_t>& jobs_on) {
  for (std::uint32_t d = 0; d < jobs_on.size(); ++d) {
    if (jobs_on[d] == 0) {
      jobs_on[d] = 1;
      return ScheduleDecision::assign(d);
    }
  }
  return ScheduleDecision::defer();
}

ScheduleDecision sched_cg(const ScheduleRequest&, std::vector<std::uint32_t>& jobs_on, std::uint32_t ratio,
                          std::uint32_t& cursor) {
  if (ratio == 0) throw ConfigError("cg ratio must be positive");
  const auto n = static_cast<std::uint32_t>(jobs_on.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t d = (cursor + k) % n;
    if (jobs_on[d] < ratio) {
      ++jobs_on[d];
      cursor = (d + 1) % n;
      return ScheduleDecision::assign(d);
    }
  }
  return ScheduleDecision::defer();
}

Scheduler::Scheduler(PolicyConfig policy, const std::vector<DeviceSpec>& devices) : policy_(policy) {
  if (devices.empty()) throw ConfigError("scheduler needs at least one device");
  if (policy_.kind == PolicyKind::CoreToGpu && policy_.cg_ratio == 0) throw ConfigError("cg ratio must be positive");
  for (const auto& s : devices) devices_.emplace_back(s);
  jobs_on_.assign(devices_.size(), 0);
}

ScheduleDecision Scheduler::decide(const ScheduleRequest& req) {
  switch (policy_.kind) {
    case PolicyKind::MgbSm: return sched_mgb_sm(req, devices_);
    case PolicyKind::MgbWarps: return sched_mgb_warps(req, devices_);
    case PolicyKind::SingleAssignment: return sched_sa(req, jobs_on_);
    case PolicyKind::CoreToGpu: return sched_cg(req, jobs_on_, policy_.cg_ratio, cg_cursor_);
  }
  throw ContractViolation("unknown policy");
}

void Scheduler::record(const ScheduleRequest& req, const ScheduleDecision& d, Micros now) {
  DecisionRecord rec;
  rec.time_us = now;
  rec.task_id = req.task_id;
  rec.job_id = req.job_id;
  rec.outcome = d.outcome;
  rec.requested_bytes = req.resources.mem_bytes;
  if (d.outcome == Outcome::Assign) {
    rec.device = d.device;
    rec.free_mem_after = devices_[d.device].free_mem_bytes();
    rec.in_use_warps_after = devices_[d.device].in_use_warps();
  } else {
    for (const auto& dev : devices_) {
      rec.free_mem_after += dev.free_mem_bytes();
      rec.in_use_warps_after += dev.in_use_warps();
    }
  }
  log_.push_back(rec);
}

ScheduleDecision Scheduler::submit(const ScheduleRequest& req, Micros now) {
  ScheduleDecision d = (!policy_.skip_ahead && !pending_.empty()) ? ScheduleDecision::defer() : decide(req);
  record(req, d, now);
  if (d.outcome == Outcome::Defer) pending_.push_back(req);
  return d;
}

void Scheduler::release(std::uint32_t device, std::uint64_t tenant) {
  if (device >= devices_.size()) throw ContractViolation("release on unknown device " + std::to_string(device));
  auto& dev = devices_[device];
  if (policy_.job_level()) {
    if (jobs_on_[device] == 0) throw ContractViolation("release of job " + std::to_string(tenant) + " on an idle device");
    --jobs_on_[device];
    if (dev.has_tenant(tenant)) dev.release_task(tenant);
  } else {
    dev.release_task(tenant);
  }
}

std::vector<std::pair<ScheduleRequest, ScheduleDecision>> Scheduler::on_release(Micros now) {
  std::vector<std::pair<ScheduleRequest, ScheduleDecision>> out;
  std::deque<ScheduleRequest> still;
  bool blocked = false;
  while (!pending_.empty()) {
    ScheduleRequest req = std::move(pending_.front());
    pending_.pop_front();
    if (blocked) {
      still.push_back(std::move(req));
      continue;
    }
    auto d = decide(req);
    record(req, d, now);
    if (d.outcome == Outcome::Defer) {
      still.push_back(req);
      if (!policy_.skip_ahead) blocked = true;
    }
    out.emplace_back(std::move(req), d);
  }
  pending_ = std::move(still);
  return out;
}

}  // namespace mgb
