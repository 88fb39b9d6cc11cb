#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgb/device_model.hpp"
#include "mgb/schedulers.hpp"
#include "mgb/trace_model.hpp"

namespace mgb::testkit {

/// `a` dominates `b` iff `b` is unreachable from the entry once `a` is
/// removed (or a == b).
bool removal_dominates(const FunctionGraph& f, BlockIndex a, BlockIndex b);
/// Same on the reversed graph from the exit.
bool removal_postdominates(const FunctionGraph& f, BlockIndex a, BlockIndex b);

/// Binding computed by walking every simple entry-to-launch path (and every
/// simple launch-to-exit path) and keeping the ops found on all of them.
struct OracleUnit {
  OpId launch_op = 0;
  std::set<std::string> mem_objs;
  std::set<OpId> alloc_ops;
  std::set<OpId> h2d_ops;
  std::set<OpId> d2h_ops;
  std::set<OpId> free_ops;
};

std::vector<OracleUnit> path_binding_oracle(const FunctionGraph& f);

/// Union-find over shared symbols; each component lists launch ops in input
/// order, components ordered by their first member.
std::vector<std::vector<OpId>> union_find_components(const std::vector<std::pair<OpId, std::set<std::string>>>& units);

/// One thread block at a time, each to the next SM from the cursor with room
/// for it.
struct OraclePlacement {
  std::vector<std::uint32_t> tbs_per_sm;
  std::uint32_t final_cursor = 0;
};

std::optional<OraclePlacement> tb_by_tb_placement(const DeviceSpec& spec, std::vector<SmUsage> sms,
                                                  std::uint32_t cursor, std::uint64_t thread_blocks,
                                                  const BlockShape& shape);

}  // namespace mgb::testkit

namespace mgb::testkit {

/// Empty when every device satisfies free + resident == capacity and every
/// SM is within its limits; otherwise a description of the first breach.
std::string device_invariant_violation(const Scheduler& s);

}  // namespace mgb::testkit
