#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mgb {

using Bytes = std::uint64_t;
using Micros = std::int64_t;
using OpId = std::uint32_t;
using BlockIndex = std::size_t;

inline constexpr std::uint32_t kWarpSize = 32;
inline constexpr std::uint64_t kMaxThreadsPerBlock = 1024;
inline constexpr Bytes kDefaultHeapLimit = Bytes{8} << 20;

struct Dim3 {
  std::uint32_t x = 1;
  std::uint32_t y = 1;
  std::uint32_t z = 1;

  std::uint64_t volume() const {
    return std::uint64_t{x} * std::uint64_t{y} * std::uint64_t{z};
  }
  auto operator<=>(const Dim3&) const = default;
};

enum class OpKind {
  Malloc,
  MemcpyH2D,
  MemcpyD2H,
  Memset,
  Free,
  SetHeapLimit,
  Launch,
  Call,
};

const char* to_string(OpKind kind);

/// One host-side GPU API call in a trace program.
struct GpuOp {
  OpKind kind = OpKind::Malloc;
  OpId id = 0;
  // Id of the op this one was cloned from; equals `id` until inlining.
  OpId origin = 0;
  // Kernel name for Launch, callee for Call.
  std::string name;
  // Exactly one for memory ops; kernel args for Launch; empty otherwise.
  std::vector<std::string> symbols;
  Bytes bytes = 0;
  Dim3 grid;
  Dim3 block;
  std::uint32_t regs_per_thread = 0;
  Bytes smem_per_block = 0;
  Micros duration_us = 0;
  bool lazy = false;

  bool operator==(const GpuOp&) const = default;

  const std::string& symbol() const { return symbols.front(); }
  bool is_memory_op() const;
};

struct BasicBlock {
  std::string label;
  std::vector<GpuOp> ops;
  std::vector<std::string> succs;
  // Probability that the first successor is taken; 0.5 when absent.
  std::optional<double> taken_prob;

  bool operator==(const BasicBlock&) const = default;
};

/// A host function. `blocks.front()` is the entry; exactly one block has no
/// successors and every block lies on some entry-to-exit path.
struct FunctionGraph {
  std::string name;
  std::vector<BasicBlock> blocks;

  bool operator==(const FunctionGraph&) const = default;

  const std::string& entry_label() const { return blocks.front().label; }
  std::optional<BlockIndex> find(std::string_view label) const;
  BlockIndex index_of(std::string_view label) const;
  BlockIndex exit_index() const;
  std::size_t op_count() const;
};

enum class JobClass { Small, Large };

const char* to_string(JobClass c);
std::optional<JobClass> job_class_from_string(std::string_view s);

struct Program {
  std::string name;
  std::map<std::string, FunctionGraph, std::less<>> functions;
  std::string main;
  std::optional<JobClass> job_class;

  bool operator==(const Program&) const = default;

  const FunctionGraph& main_function() const;
  FunctionGraph& main_function();
};

/// Index-based adjacency of a function's CFG.
struct Cfg {
  std::vector<std::vector<BlockIndex>> succs;
  std::vector<std::vector<BlockIndex>> preds;
  BlockIndex entry = 0;
  BlockIndex exit = 0;

  static Cfg of(const FunctionGraph& f);
  std::size_t size() const { return succs.size(); }
};

struct OpLocation {
  BlockIndex block = 0;
  std::size_t index = 0;

  auto operator<=>(const OpLocation&) const = default;
};

std::unordered_map<OpId, OpLocation> locate_ops(const FunctionGraph& f);

/// Parses and validates a `.gput` trace. Throws ParseError. Op ids are
/// canonical: numbered from 0 over functions in name order, then blocks, then
/// ops, so printing and re-parsing reproduces them.
Program parse_program(std::string_view text);

std::string print_program(const Program& p);

/// Flattens every call reachable from main into a single function. Callee
/// blocks get fresh labels and fresh op ids; `origin` keeps the source id.
Program inline_calls(const Program& p);

}  // namespace mgb
