#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/device_model.hpp"

namespace mgb {

enum class PolicyKind { MgbSm, MgbWarps, SingleAssignment, CoreToGpu };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::MgbWarps;
  std::uint32_t cg_ratio = 6;
  // First-fit over the pending queue; strict FIFO when false.
  bool skip_ahead = true;

  bool operator==(const PolicyConfig&) const = default;

  /// `sa`, `cg:<ratio>`, `mgb-sm`, `mgb-warps`. Throws ConfigError.
  static PolicyConfig parse(std::string_view text);
  /// Inverse of parse.
  std::string name() const;
  /// SA and CG place whole jobs; the MGB policies place GPU tasks.
  bool job_level() const { return kind == PolicyKind::SingleAssignment || kind == PolicyKind::CoreToGpu; }
};

struct ScheduleRequest {
  // Task instance id for MGB policies, job id for SA/CG. Doubles as the
  // device tenant id.
  std::uint64_t task_id = 0;
  std::uint64_t job_id = 0;
  ResourceRequest resources;
  Micros arrival_us = 0;
};

enum class Outcome { Assign, Defer, Reject };

const char* to_string(Outcome o);

struct ScheduleDecision {
  Outcome outcome = Outcome::Defer;
  std::uint32_t device = 0;
  std::string reason;

  static ScheduleDecision assign(std::uint32_t d) { return {Outcome::Assign, d, {}}; }
  static ScheduleDecision defer() { return {Outcome::Defer, 0, {}}; }
  static ScheduleDecision reject(std::string why) { return {Outcome::Reject, 0, std::move(why)}; }
};

struct DecisionRecord {
  Micros time_us = 0;
  std::uint64_t task_id = 0;
  std::uint64_t job_id = 0;
  Outcome outcome = Outcome::Defer;
  std::optional<std::uint32_t> device;
  Bytes requested_bytes = 0;
  Bytes free_mem_after = 0;
  std::uint64_t in_use_warps_after = 0;

  bool operator==(const DecisionRecord&) const = default;
};

/// Stateless policy decisions. Each mutates `devices` only when it assigns.
ScheduleDecision sched_mgb_sm(const ScheduleRequest& req, std::vector<DeviceState>& devices);
ScheduleDecision sched_mgb_warps(const ScheduleRequest& req, std::vector<DeviceState>& devices);
/// `jobs_on` counts resident jobs per device and is updated on assignment.
ScheduleDecision sched_sa(const ScheduleRequest& req, std::vector<std::uint32_t>& jobs_on);
ScheduleDecision sched_cg(const ScheduleRequest& req, std::vector<std::uint32_t>& jobs_on, std::uint32_t ratio,
                          std::uint32_t& cursor);

/// The single decision authority: owns the devices, the pending queue and
/// the decision log.
class Scheduler {
 public:
  Scheduler(PolicyConfig policy, const std::vector<DeviceSpec>& devices);

  const PolicyConfig& policy() const { return policy_; }
  const std::vector<DeviceState>& devices() const { return devices_; }
  std::vector<DeviceState>& devices() { return devices_; }
  const std::deque<ScheduleRequest>& pending() const { return pending_; }
  const std::vector<DecisionRecord>& log() const { return log_; }
  std::uint32_t jobs_on(std::uint32_t device) const { return jobs_on_.at(device); }

  /// Decides a new request. Deferred requests join the pending queue; under
  /// strict FIFO a new request also waits behind anything already pending.
  ScheduleDecision submit(const ScheduleRequest& req, Micros now);

  /// Returns the tenant's resources (and, for SA/CG, its job slot).
  void release(std::uint32_t device, std::uint64_t tenant);

  /// Re-drives the pending queue after a release. Returns every decision made,
  /// in queue order.
  std::vector<std::pair<ScheduleRequest, ScheduleDecision>> on_release(Micros now);

 private:
  ScheduleDecision decide(const ScheduleRequest& req);
  void record(const ScheduleRequest& req, const ScheduleDecision& d, Micros now);

  PolicyConfig policy_;
  std::vector<DeviceState> devices_;
  std::vector<std::uint32_t> jobs_on_;
  std::uint32_t cg_cursor_ = 0;
  std::deque<ScheduleRequest> pending_;
  std::vector<DecisionRecord> log_;
};

}  // namespace mgb
