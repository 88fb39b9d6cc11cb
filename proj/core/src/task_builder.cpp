#include "mgb/task_builder.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "mgb/error.hpp"

namespace mgb {

namespace {

// Position `a` precedes `b` on every path from the entry to `b`.
bool point_dominates(const DominatorMap& dom, OpLocation a, OpLocation b) {
  return a.block == b.block ? a.index < b.index : dom.dominates(a.block, b.block);
}

// Position `a` follows `b` on every path from `b` to the exit.
bool point_postdominates(const DominatorMap& pdom, OpLocation a, OpLocation b) {
  return a.block == b.block ? a.index > b.index : pdom.dominates(a.block, b.block);
}

const FunctionGraph& single_function(const Program& p) {
  const auto& f = p.main_function();
  for (const auto& b : f.blocks) {
    for (const auto& op : b.ops) {
      if (op.kind == OpKind::Call) throw AnalysisError("task construction needs an inlined program; found call to '" + op.name + "'");
    }
  }
  return f;
}

Bytes checked_add(Bytes a, Bytes b) {
  Bytes out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw AnalysisError("byte count overflow in resource request");
  return out;
}

struct LocatedOp {
  const GpuOp* op;
  OpLocation at;
};

std::vector<LocatedOp> all_ops(const FunctionGraph& f) {
  std::vector<LocatedOp> out;
  for (BlockIndex b = 0; b < f.blocks.size(); ++b) {
    for (std::size_t i = 0; i < f.blocks[b].ops.size(); ++i) out.push_back({&f.blocks[b].ops[i], {b, i}});
  }
  return out;
}

void sort_by_location(std::vector<OpId>& ids, const std::unordered_map<OpId, OpLocation>& where) {
  std::sort(ids.begin(), ids.end(), [&](OpId a, OpId b) { return where.at(a) < where.at(b); });
}

}  // namespace

std::vector<UnitTask> build_unit_tasks(const Program& p) {
  const auto& f = single_function(p);
  return build_unit_tasks(p, compute_dominators(f), compute_postdominators(f));
}

std::vector<UnitTask> build_unit_tasks(const Program& p, const DominatorMap& dom, const DominatorMap& pdom) {
  const auto& f = single_function(p);
  const auto ops = all_ops(f);
  std::set<std::string, std::less<>> declared;
  for (const auto& lo : ops) {
    if (lo.op->kind == OpKind::Malloc) declared.insert(lo.op->symbol());
  }
  std::unordered_map<OpId, OpLocation> where;
  for (const auto& lo : ops) where.emplace(lo.op->id, lo.at);

  std::vector<UnitTask> units;
  for (const auto& lo : ops) {
    const GpuOp& launch = *lo.op;
    if (launch.kind != OpKind::Launch) continue;
    UnitTask u;
    u.launch_op = launch.id;
    u.launch_at = lo.at;
    u.kernel = launch.name;
    u.grid = launch.grid;
    u.block = launch.block;
    u.regs_per_thread = launch.regs_per_thread;
    u.smem_per_block = launch.smem_per_block;
    u.duration_us = launch.duration_us;
    for (const auto& sym : launch.symbols) {
      if (!declared.count(sym)) {
        throw AnalysisError("launch of '" + launch.name + "' uses undeclared symbol '" + sym + "'");
      }
      u.mem_objs.insert(sym);
    }
    std::optional<LocatedOp> heap;
    for (const auto& mo : ops) {
      const GpuOp& op = *mo.op;
      if (op.lazy) continue;
      if (op.kind == OpKind::SetHeapLimit) {
        if (point_dominates(dom, mo.at, lo.at)) {
          if (!heap || dom.depth(mo.at.block) > dom.depth(heap->at.block) ||
              (mo.at.block == heap->at.block && mo.at.index > heap->at.index)) {
            heap = mo;
          }
        }
        continue;
      }
      if (!op.is_memory_op() || !u.mem_objs.count(op.symbol())) continue;
      switch (op.kind) {
        case OpKind::Malloc:
          if (point_dominates(dom, mo.at, lo.at)) u.alloc_ops.push_back(op.id);
          break;
        case OpKind::MemcpyH2D:
        case OpKind::Memset:
          if (point_dominates(dom, mo.at, lo.at)) u.h2d_ops.push_back(op.id);
          break;
        case OpKind::MemcpyD2H:
          if (point_postdominates(pdom, mo.at, lo.at)) u.d2h_ops.push_back(op.id);
          break;
        case OpKind::Free:
          if (point_postdominates(pdom, mo.at, lo.at)) u.free_ops.push_back(op.id);
          break;
        default:
          break;
      }
    }
    if (heap) u.heap_op = heap->op->id;
    for (auto* v : {&u.alloc_ops, &u.h2d_ops, &u.d2h_ops, &u.free_ops}) sort_by_location(*v, where);
    units.push_back(std::move(u));
  }
  return units;
}

std::vector<GpuTask> merge_unit_tasks(std::vector<UnitTask> units) {
  std::sort(units.begin(), units.end(), [](const UnitTask& a, const UnitTask& b) { return a.launch_at < b.launch_at; });

  // Union-find keyed by symbol; each unit joins the sets of its arguments.
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& s) -> std::string {
    auto& p = parent.at(s);
    if (p == s) return s;
    p = find(p);
    return p;
  };
  for (const auto& u : units) {
    for (const auto& s : u.mem_objs) parent.emplace(s, s);
    if (u.mem_objs.empty()) continue;
    const std::string root = find(*u.mem_objs.begin());
    for (const auto& s : u.mem_objs) {
      auto r = find(s);
      if (r != root) parent[r] = root;
    }
  }

  std::vector<GpuTask> tasks;
  std::map<std::string, std::size_t> task_of_root;
  for (auto& u : units) {
    std::size_t idx;
    if (u.mem_objs.empty()) {
      idx = tasks.size();
      tasks.emplace_back();
    } else {
      auto root = find(*u.mem_objs.begin());
      auto [it, inserted] = task_of_root.emplace(root, tasks.size());
      if (inserted) tasks.emplace_back();
      idx = it->second;
    }
    auto& t = tasks[idx];
    t.id = idx;
    t.mem_objs.insert(u.mem_objs.begin(), u.mem_objs.end());
    t.unit_tasks.push_back(std::move(u));
  }
  return tasks;
}

ResourceRequest compute_resource_request(const GpuTask& t, const Program& p) {
  if (t.unit_tasks.empty()) throw ContractViolation("GPU task without launches");
  const auto& f = p.main_function();
  std::unordered_map<OpId, const GpuOp*> by_id;
  for (const auto& b : f.blocks) {
    for (const auto& op : b.ops) by_id.emplace(op.id, &op);
  }
  auto op_at = [&](OpId id) -> const GpuOp& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractViolation("task refers to op " + std::to_string(id) + " not in program");
    return *it->second;
  };

  ResourceRequest r;
  r.heap_limit_bytes = t.unit_tasks.front().heap_op ? op_at(*t.unit_tasks.front().heap_op).bytes : kDefaultHeapLimit;

  std::set<OpId> allocs;
  for (const auto& u : t.unit_tasks) allocs.insert(u.alloc_ops.begin(), u.alloc_ops.end());
  Bytes mem = 0;
  for (OpId id : allocs) mem = checked_add(mem, op_at(id).bytes);
  r.mem_bytes = checked_add(mem, r.heap_limit_bytes);

  const UnitTask* widest = &t.unit_tasks.front();
  for (const auto& u : t.unit_tasks) {
    if (u.total_warps() > widest->total_warps()) widest = &u;
    r.regs_per_thread = std::max(r.regs_per_thread, u.regs_per_thread);
    r.smem_per_block = std::max(r.smem_per_block, u.smem_per_block);
    if (__builtin_add_overflow(r.est_duration_us, u.duration_us, &r.est_duration_us)) {
      throw AnalysisError("duration overflow in resource request");
    }
  }
  r.thread_blocks = widest->grid.volume();
  r.threads_per_block = widest->threads_per_block();
  r.warps_per_block = widest->warps_per_block();
  r.total_warps = widest->total_warps();
  return r;
}

std::optional<ProgramPoint> place_probe(const GpuTask& t, const Program& p, const DominatorMap& dom,
                                        const DominatorMap& pdom) {
  const auto& f = p.main_function();
  const auto where = locate_ops(f);
  std::vector<OpLocation> uses;
  for (const auto& u : t.unit_tasks) {
    uses.push_back(u.launch_at);
    for (const auto* ids : {&u.alloc_ops, &u.h2d_ops, &u.d2h_ops, &u.free_ops}) {
      for (OpId id : *ids) uses.push_back(where.at(id));
    }
  }
  std::vector<OpLocation> defs;
  if (!t.unit_tasks.empty() && t.unit_tasks.front().heap_op) defs.push_back(where.at(*t.unit_tasks.front().heap_op));

  std::optional<OpLocation> best;
  for (BlockIndex b = 0; b < f.blocks.size(); ++b) {
    for (std::size_t i = 0; i <= f.blocks[b].ops.size(); ++i) {
      // Before op i of block b; index ops.size() is the end of the block.
      const bool covers_uses = std::all_of(uses.begin(), uses.end(), [&](OpLocation u) {
        return u.block == b ? i <= u.index : dom.dominates(b, u.block);
      });
      if (!covers_uses) continue;
      const bool after_defs = std::all_of(defs.begin(), defs.end(), [&](OpLocation d) {
        return d.block == b ? i > d.index : pdom.dominates(b, d.block);
      });
      if (!after_defs) continue;
      if (!best) {
        best = OpLocation{b, i};
        continue;
      }
      const auto key = std::make_pair(dom.depth(b), i);
      const auto best_key = std::make_pair(dom.depth(best->block), best->index);
      if (key > best_key || (key == best_key && f.blocks[b].label < f.blocks[best->block].label)) best = OpLocation{b, i};
    }
  }
  if (!best) return std::nullopt;
  return ProgramPoint{f.blocks[best->block].label, best->index};
}

std::set<OpId> bound_op_ids(const std::vector<UnitTask>& units) {
  std::set<OpId> out;
  for (const auto& u : units) {
    out.insert(u.launch_op);
    for (const auto* ids : {&u.alloc_ops, &u.h2d_ops, &u.d2h_ops, &u.free_ops}) out.insert(ids->begin(), ids->end());
    if (u.heap_op) out.insert(*u.heap_op);
  }
  return out;
}

Program mark_lazy_ops(const Program& p) {
  const auto bound = bound_op_ids(build_unit_tasks(p));
  Program out = p;
  for (auto& b : out.main_function().blocks) {
    for (auto& op : b.ops) {
      if (op.kind != OpKind::Call && !bound.count(op.id)) op.lazy = true;
    }
  }
  return out;
}

Program force_lazy(const Program& p) {
  Program out = p;
  for (auto& [_, f] : out.functions) {
    for (auto& b : f.blocks) {
      for (auto& op : b.ops) {
        if (op.is_memory_op() || op.kind == OpKind::SetHeapLimit) op.lazy = true;
      }
    }
  }
  return out;
}

TaskAnalysis analyze_program(const Program& p) {
  TaskAnalysis a;
  a.program = mark_lazy_ops(inline_calls(p));
  const auto& f = a.program.main_function();
  a.dom = compute_dominators(f);
  a.pdom = compute_postdominators(f);
  a.tasks = merge_unit_tasks(build_unit_tasks(a.program, a.dom, a.pdom));
  for (auto& t : a.tasks) {
    t.resources = compute_resource_request(t, a.program);
    if (auto point = place_probe(t, a.program, a.dom, a.pdom)) {
      t.probe = *point;
    } else {
      t.lazy = true;
      const auto& first = t.unit_tasks.front().launch_at;
      t.probe = ProgramPoint{f.blocks[first.block].label, first.index};
    }
  }
  return a;
}

}  // namespace mgb
