#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mgb/schedulers.hpp"
#include "mgb/workload.hpp"

namespace mgb {

enum class InterferenceModel { ProcessorSharing, None };

struct SimConfig {
  std::uint32_t workers = 1;
  std::uint64_t seed = 0;
  std::vector<DeviceSpec> devices;
  PolicyConfig policy;
  InterferenceModel interference = InterferenceModel::ProcessorSharing;
  // Host copy cost; zero makes memcpy/memset free.
  double host_ns_per_byte = 0.0;
  // Route every memory op of MGB jobs through the lazy runtime.
  bool force_lazy = false;

  /// Throws ConfigError.
  void validate() const;
};

enum class JobState { Queued, Running, Blocked, Done, Crashed };
enum class CrashKind { Oom, Rejected };

const char* to_string(JobState s);
const char* to_string(CrashKind k);

struct JobRecord {
  std::uint64_t job_id = 0;
  JobState state = JobState::Queued;
  Micros start_us = 0;
  Micros completion_us = 0;
  // Time spent deferred by the scheduler.
  Micros wait_us = 0;

  bool operator==(const JobRecord&) const = default;
  // Every job arrives at time zero.
  Micros turnaround_us() const { return completion_us; }
};

struct KernelRecord {
  std::uint64_t job_id = 0;
  std::string kernel;
  std::uint32_t device = 0;
  Micros start_us = 0;
  Micros end_us = 0;
  Micros solo_us = 0;

  bool operator==(const KernelRecord&) const = default;
  Micros actual_us() const { return end_us - start_us; }
};

struct CrashRecord {
  std::uint64_t job_id = 0;
  Micros time_us = 0;
  Bytes requested_bytes = 0;
  Bytes free_bytes = 0;
  CrashKind kind = CrashKind::Oom;

  bool operator==(const CrashRecord&) const = default;
};

/// One admitted (or attempted) GPU task instance of an MGB job.
struct TaskRecord {
  std::uint64_t instance = 0;
  std::uint64_t job_id = 0;
  std::size_t task = 0;
  ResourceRequest request;

  bool operator==(const TaskRecord&) const = default;
};

struct SimReport {
  std::string policy;
  std::uint32_t workers = 0;
  std::uint64_t seed = 0;
  std::uint64_t workload_hash = 0;
  std::vector<std::string> devices;
  Micros makespan_us = 0;
  std::vector<JobRecord> jobs;
  std::vector<KernelRecord> kernels;
  std::vector<CrashRecord> crashes;
  std::vector<TaskRecord> tasks;
  std::vector<DecisionRecord> decisions;

  bool operator==(const SimReport&) const = default;

  std::size_t completed() const;
  std::size_t crashed() const;
  std::size_t oom_crashes() const;
};

/// State visible to observers after every event.
struct SimSnapshot {
  Micros now = 0;
  const Scheduler& scheduler;
  // Running kernels per device.
  const std::vector<std::size_t>& running;
  // No further event is due at `now`.
  bool settled = false;
};

struct SimHooks {
  std::function<void(const SimSnapshot&)> observer;
  // Called with the queue dump at every lazy launch preparation.
  std::function<void(std::uint64_t job_id, const std::string& dump)> lazy_trace;
};

/// Runs the batch to quiescence. Pure in (workload, config).
SimReport run_sim(const Workload& workload, const SimConfig& config, const SimHooks& hooks = {});

/// Random simple entry-to-exit block path. Branches pick the first successor
/// with the block's probability (0.5 by default) among successors that can
/// still reach the exit without revisiting a block.
std::vector<BlockIndex> sample_path(const FunctionGraph& f, std::mt19937_64& rng);

/// Uniform double in [0, 1) from the top 53 bits.
double unit_double(std::mt19937_64& rng);

/// Per-job generator derived from the run seed.
std::mt19937_64 job_rng(std::uint64_t seed, std::uint64_t job_id);

/// Deterministic JSON (sorted keys, fixed formatting).
std::string report_to_json(const SimReport& r);

}  // namespace mgb
