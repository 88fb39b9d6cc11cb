#include "mgb/lazy_runtime.hpp"

#include <sstream>

#include "mgb/error.hpp"

namespace mgb {

namespace {

// Simulated device allocations start here; purely cosmetic, pseudo addresses
// are a different type.
constexpr std::uint64_t kDeviceHeapBase = 0x7000'0000'0000ull;

Bytes net_malloc_bytes(const std::vector<GpuOp>& ops) {
  Bytes bytes = 0;
  for (const auto& op : ops) {
    if (op.kind == OpKind::Malloc) bytes = op.bytes;
    if (op.kind == OpKind::Free) bytes = 0;
  }
  return bytes;
}

}  // namespace

PseudoAddress LazyState::lazy_alloc(const std::string& symbol, Bytes bytes, OpId op) {
  if (bytes == 0) throw RuntimeError("lazy allocation of '" + symbol + "' with zero bytes");
  GpuOp m;
  m.kind = OpKind::Malloc;
  m.id = op;
  m.origin = op;
  m.symbols = {symbol};
  m.bytes = bytes;
  m.lazy = true;
  return lazy_alloc(m);
}

PseudoAddress LazyState::lazy_alloc(const GpuOp& malloc_op) {
  if (malloc_op.kind != OpKind::Malloc) throw ContractViolation("lazy_alloc needs a malloc op");
  if (malloc_op.bytes == 0) throw RuntimeError("lazy allocation of '" + malloc_op.symbol() + "' with zero bytes");
  PseudoAddress addr{next_id_++, malloc_op.symbol()};
  queues_.emplace(addr.id, Entry{addr, {malloc_op}});
  by_symbol_[addr.symbol] = addr.id;
  return addr;
}

LazyState::Entry& LazyState::entry(const PseudoAddress& addr) {
  auto it = queues_.find(addr.id);
  if (it == queues_.end()) throw RuntimeError("unknown pseudo address #" + std::to_string(addr.id));
  return it->second;
}

const LazyState::Entry& LazyState::entry(const PseudoAddress& addr) const {
  auto it = queues_.find(addr.id);
  if (it == queues_.end()) throw RuntimeError("unknown pseudo address #" + std::to_string(addr.id));
  return it->second;
}

void LazyState::record_op(const PseudoAddress& addr, const GpuOp& op) {
  switch (op.kind) {
    case OpKind::MemcpyH2D:
    case OpKind::MemcpyD2H:
    case OpKind::Memset:
    case OpKind::Free:
    case OpKind::SetHeapLimit:
      break;
    default:
      throw ContractViolation(std::string("cannot record ") + to_string(op.kind) + " on a pseudo address");
  }
  auto& e = entry(addr);
  if (is_bound(addr)) {
    throw RuntimeError("recording " + std::string(to_string(op.kind)) + " on '" + addr.symbol + "' (#" +
                       std::to_string(addr.id) + ") after it was bound");
  }
  e.ops.push_back(op);
  if (op.kind == OpKind::SetHeapLimit) record_heap_limit(op);
}

void LazyState::record_heap_limit(const GpuOp& op) {
  if (op.kind != OpKind::SetHeapLimit) throw ContractViolation("record_heap_limit needs a set_heap_limit op");
  heap_limit_ = op.bytes;
  heap_log_.push_back(op);
}

LaunchPreparation LazyState::kernel_launch_prepare(const GpuOp& launch,
                                                   const std::optional<ResourceRequest>& static_req) {
  if (launch.kind != OpKind::Launch) throw ContractViolation("kernel_launch_prepare needs a launch op");
  LaunchPreparation prep;
  for (const auto& sym : launch.symbols) {
    auto it = by_symbol_.find(sym);
    if (it == by_symbol_.end()) {
      if (static_req) continue;
      throw RuntimeError("launch of '" + launch.name + "' uses '" + sym + "' which has no recorded allocation");
    }
    const auto& e = queues_.at(it->second);
    if (e.ops.empty()) throw RuntimeError("launch of '" + launch.name + "' uses '" + sym + "' with an empty queue");
    if (bound_.count(e.address.id) || claimed_.count(e.address.id)) continue;
    prep.lazy_bytes += net_malloc_bytes(e.ops);
    prep.to_bind.push_back(e.address);
    claimed_.insert(e.address.id);
  }
  if (static_req) {
    prep.request = *static_req;
  } else {
    prep.request.heap_limit_bytes = heap_limit_;
    prep.request.mem_bytes = heap_limit_;
    prep.request.thread_blocks = launch.grid.volume();
    prep.request.threads_per_block = static_cast<std::uint32_t>(launch.block.volume());
    prep.request.warps_per_block = (prep.request.threads_per_block + kWarpSize - 1) / kWarpSize;
    prep.request.total_warps = prep.request.thread_blocks * prep.request.warps_per_block;
    prep.request.regs_per_thread = launch.regs_per_thread;
    prep.request.smem_per_block = launch.smem_per_block;
    prep.request.est_duration_us = launch.duration_us;
  }
  if (__builtin_add_overflow(prep.request.mem_bytes, prep.lazy_bytes, &prep.request.mem_bytes)) {
    throw RuntimeError("byte count overflow while preparing launch of '" + launch.name + "'");
  }
  return prep;
}

std::vector<ReplayedOp> LazyState::replay(const LaunchPreparation& prep, std::uint32_t device) {
  std::vector<ReplayedOp> out;
  for (const auto& addr : prep.to_bind) {
    const auto& e = entry(addr);
    if (bound_.count(addr.id)) throw RuntimeError("pseudo address #" + std::to_string(addr.id) + " is already bound");
    const Bytes bytes = net_malloc_bytes(e.ops);
    auto& cursor = next_device_address_.try_emplace(device, kDeviceHeapBase).first->second;
    bound_.emplace(addr.id, DeviceBinding{device, cursor, bytes});
    cursor += bytes;
    claimed_.erase(addr.id);
    for (const auto& op : e.ops) out.push_back({addr, op, device});
  }
  return out;
}

std::optional<PseudoAddress> LazyState::address_of(const std::string& symbol) const {
  auto it = by_symbol_.find(symbol);
  if (it == by_symbol_.end()) return std::nullopt;
  return queues_.at(it->second).address;
}

std::optional<DeviceBinding> LazyState::binding(const PseudoAddress& addr) const {
  auto it = bound_.find(addr.id);
  if (it == bound_.end()) return std::nullopt;
  return it->second;
}

const std::vector<GpuOp>& LazyState::queue(const PseudoAddress& addr) const { return entry(addr).ops; }

std::string LazyState::describe() const {
  std::ostringstream os;
  os << "heap_limit=" << heap_limit_ << '\n';
  for (const auto& [id, e] : queues_) {
    os << "#" << id << ' ' << e.address.symbol << (bound_.count(id) ? " bound" : " pending") << " [";
    for (std::size_t i = 0; i < e.ops.size(); ++i) {
      os << (i ? ", " : "") << to_string(e.ops[i].kind);
      if (e.ops[i].kind != OpKind::Free) os << '(' << e.ops[i].bytes << ')';
    }
    os << "]\n";
  }
  return os.str();
}

}  // namespace mgb
