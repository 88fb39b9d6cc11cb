#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgb/dominators.hpp"
#include "mgb/trace_model.hpp"

namespace mgb {

/// A position in a block: before the op at `index` (== ops.size() means the
/// end of the block).
struct ProgramPoint {
  std::string block;
  std::size_t index = 0;

  bool operator==(const ProgramPoint&) const = default;
};

/// One kernel launch and the memory operations statically bound to it.
struct UnitTask {
  OpId launch_op = 0;
  OpLocation launch_at;
  std::string kernel;
  std::set<std::string> mem_objs;
  std::vector<OpId> alloc_ops;
  // Host-to-device copies and memsets: both initialize device memory before
  // the launch and bind through dominance.
  std::vector<OpId> h2d_ops;
  std::vector<OpId> d2h_ops;
  std::vector<OpId> free_ops;
  // Closest non-lazy set_heap_limit dominating the launch.
  std::optional<OpId> heap_op;
  Dim3 grid;
  Dim3 block;
  std::uint32_t regs_per_thread = 0;
  Bytes smem_per_block = 0;
  Micros duration_us = 0;

  bool operator==(const UnitTask&) const = default;

  std::uint32_t threads_per_block() const { return static_cast<std::uint32_t>(block.volume()); }
  std::uint32_t warps_per_block() const { return (threads_per_block() + kWarpSize - 1) / kWarpSize; }
  std::uint64_t total_warps() const { return grid.volume() * warps_per_block(); }
};

struct ResourceRequest {
  Bytes mem_bytes = 0;
  Bytes heap_limit_bytes = kDefaultHeapLimit;
  std::uint64_t thread_blocks = 0;
  std::uint32_t threads_per_block = 0;
  std::uint32_t warps_per_block = 0;
  std::uint64_t total_warps = 0;
  std::uint32_t regs_per_thread = 0;
  Bytes smem_per_block = 0;
  Micros est_duration_us = 0;

  bool operator==(const ResourceRequest&) const = default;
};

struct GpuTask {
  std::size_t id = 0;
  std::vector<UnitTask> unit_tasks;
  std::set<std::string> mem_objs;
  ProgramPoint probe;
  // Set when no program point satisfies the probe constraints; the whole
  // task is then bound by the lazy runtime at launch time.
  bool lazy = false;
  ResourceRequest resources;

  bool operator==(const GpuTask&) const = default;
};

/// One UnitTask per Launch of the (single-function, inlined) program, in
/// program order. Throws AnalysisError for launches on undeclared symbols.
std::vector<UnitTask> build_unit_tasks(const Program& p);
std::vector<UnitTask> build_unit_tasks(const Program& p, const DominatorMap& dom, const DominatorMap& pdom);

/// Connected components of the shares-a-memory-object relation, ordered by
/// each component's first launch.
std::vector<GpuTask> merge_unit_tasks(std::vector<UnitTask> units);

/// Throws AnalysisError on byte-count overflow.
ResourceRequest compute_resource_request(const GpuTask& t, const Program& p);

/// Latest point that follows every definition feeding the task's resource
/// expressions (its effective set_heap_limit) and dominates every GPU op of
/// the task. Empty when no such point exists.
std::optional<ProgramPoint> place_probe(const GpuTask& t, const Program& p, const DominatorMap& dom,
                                        const DominatorMap& pdom);

/// Flags every GPU op that is not bound to any unit task as lazy. Idempotent.
Program mark_lazy_ops(const Program& p);

/// Marks every memory op and set_heap_limit lazy, forcing the lazy runtime to
/// bind all memory at launch time.
Program force_lazy(const Program& p);

/// The whole static pipeline: inline, mark lazy residue, build and merge
/// tasks, compute requests and probes.
struct TaskAnalysis {
  Program program;
  DominatorMap dom;
  DominatorMap pdom;
  std::vector<GpuTask> tasks;
};

TaskAnalysis analyze_program(const Program& p);

/// Ids of ops bound to at least one unit task (launches included).
std::set<OpId> bound_op_ids(const std::vector<UnitTask>& units);

}  // namespace mgb
