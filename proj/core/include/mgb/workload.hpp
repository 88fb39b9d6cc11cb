#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/trace_model.hpp"

namespace mgb {

struct WorkloadJob {
  std::uint64_t job_id = 0;
  Program program;
  std::optional<JobClass> job_class;
  // Where the trace came from: a path, or empty for inline traces.
  std::string trace_path;

  bool operator==(const WorkloadJob&) const = default;
};

/// A batch of jobs, all queued at time zero, pulled in order.
struct Workload {
  std::string name;
  std::vector<WorkloadJob> jobs;

  bool operator==(const Workload&) const = default;

  /// FNV-1a over job ids and canonical trace text.
  std::uint64_t hash() const;
};

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull);

/// JSON Lines, one `{job_id, inline_trace | trace_path, class}` per line.
/// Relative trace paths resolve against `base_dir`. Throws ConfigError.
Workload parse_workload(std::string_view jsonl, const std::string& base_dir = ".");
Workload load_workload(const std::string& path);

/// Writes every job with its trace inline. Byte-identical for equal input.
std::string serialize_workload(const Workload& w);

}  // namespace mgb
